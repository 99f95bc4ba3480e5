"""
ssrt_mixture

Stop-signal reaction time (SSRT) estimation with single Ex-Gaussian and
two-state mixture SSRT distributions.

Modules:
    exgauss   Ex-Gaussian density, cdf, survival, quantile, sampling and moments
    mixture   two-component type-A / type-B mixture SSRT
    racesim   horse-race stop-signal task simulator and cluster partition
    indices   crude, Logan (1994) and weighted constant SSRT indices
    bayesfit  censored race likelihood and the individual Bayesian fit
    mcmc      adaptive component-wise Metropolis and R-hat
    tsbpa     stage-2 pooling of subject SSRT triples
    sotest    KS test, PSPDT and the paired t-test
    analysis  Colonius retrieval and the weight sweep
    io        CSV and JSON persistence
"""

from .analysis import colonius_cdf, colonius_mixture_cdf, individual_comparison, weight_sweep
from .bayesfit import fit_all_clusters, fit_ibpa, inhibit_probability, loglik_go, loglik_stop
from .errors import (
    DataFormatError,
    DesignError,
    EstimatorUndefinedError,
    NumericalError,
    ParameterDomainError,
    PreconditionError,
    SchemaVersionError,
    SsrtError,
)
from .exgauss import exg_cdf, exg_moments, exg_pdf, exg_quantile, exg_sample, exg_sf, exg_shape
from .indices import ssrt_crude, ssrt_logan1994, ssrt_weighted
from .mixture import make_mixture, mixture_cdf, mixture_moments, mixture_pdf, mixture_sample, mixture_shape
from .racesim import extract_views, partition_clusters, simulate_cohort, simulate_sst
from .sotest import compare_overall, ks_two_sample, paired_t_test, pspdt
from .tsbpa import fit_stage2, overall_distributions
from .types import (
    ClusterPartition,
    DesignConfig,
    ExGaussianParams,
    IbpaConfig,
    MixtureSsrt,
    PspdtConfig,
    SstDataset,
    Stage2Config,
    SweepConfig,
)
from .utils import SOFTWARE_VERSION

__version__ = SOFTWARE_VERSION
