"""
types.py

Pydantic models for the SSRT pipeline: distribution parameters, stop-signal
task sessions and their cluster partition, run configurations and the result
objects returned by the estimators and tests.

Sections:
    - Distributions
    - Stop-signal task data
    - Constant SSRT indices
    - Bayesian estimation (individual and two-stage)
    - Stochastic-order tests
    - Weight sweep
"""

import math
from typing import Dict, List, Literal, Optional, Tuple, TypeAlias, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

PRIOR_LO = 10.0
PRIOR_HI = 2000.0
SCHEMA_VERSION = 1

Cluster: TypeAlias = Literal["S", "A", "B"]
Alternative: TypeAlias = Literal["two-sided", "greater", "less"]
TrialKind: TypeAlias = Literal["go", "stop"]

GO_PARAMS = ("mu_go", "sigma_go", "tau_go")
STOP_PARAMS = ("mu_stop", "sigma_stop", "tau_stop")
RACE_PARAMS = GO_PARAMS + STOP_PARAMS
STAGE2_PARAMS = (
    "mu_mu", "beta20", "beta21", "beta30", "beta31", "beta32",
    "sd_mu", "sd_sigma", "sd_tau",
)


# ======================================================================
# 1. DISTRIBUTIONS
# ======================================================================


class ExGaussianParams(BaseModel):
    """Parameter triple of one Ex-Gaussian distribution, all in ms."""

    model_config = ConfigDict(frozen=True)

    mu: float
    """Mean of the Gaussian component."""
    sigma: float
    """Standard deviation of the Gaussian component; strictly positive."""
    tau: float
    """Mean of the exponential component; strictly positive."""

    @field_validator("mu")
    @classmethod
    def _finite_mu(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError(f"mu must be finite, got {value}")
        return value

    @field_validator("sigma", "tau")
    @classmethod
    def _positive_scale(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"scale parameters must be finite and > 0, got {value}")
        return value

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.mu, self.sigma, self.tau)

    def in_prior_support(self, lo: float = PRIOR_LO, hi: float = PRIOR_HI) -> bool:
        return all(lo <= v <= hi for v in self.as_tuple())

    def shifted(self, c: float) -> "ExGaussianParams":
        return ExGaussianParams(mu=self.mu + c, sigma=self.sigma, tau=self.tau)

    @property
    def mean(self) -> float:
        return self.mu + self.tau

    @property
    def variance(self) -> float:
        return self.sigma ** 2 + self.tau ** 2


class MixtureSsrt(BaseModel):
    """Two-state mixture SSRT: component A with weight w_a, component B otherwise."""

    model_config = ConfigDict(frozen=True)

    w_a: float = Field(ge=0.0, le=1.0)
    theta_a: ExGaussianParams
    theta_b: ExGaussianParams

    @property
    def w_b(self) -> float:
        return 1.0 - self.w_a


Distribution: TypeAlias = Union[ExGaussianParams, MixtureSsrt]


class MomentSummary(BaseModel):
    """Raw moments and shape statistics of one SSRT distribution."""

    raw_moments: Tuple[float, float, float, float]
    mean: float
    variance: float
    sd: float
    skewness: float
    kurtosis: float
    """Non-excess kurtosis (3 for a Gaussian)."""


# ======================================================================
# 2. STOP-SIGNAL TASK DATA
# ======================================================================


class Trial(BaseModel):
    """One stop-signal task trial."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=1)
    """1-based position of the trial in its session."""
    kind: TrialKind
    ssd_ms: Optional[float] = None
    """Stop-signal delay; present on stop trials only."""
    rt_ms: Optional[float] = None
    """Observed response time; absent on successfully inhibited stop trials."""
    inhibited: Optional[bool] = None
    latent_go_ms: Optional[float] = None
    """Simulator debug channel: the go finishing time, observed or not."""
    latent_ssrt_ms: Optional[float] = None
    """Simulator debug channel: the stop latency drawn on a stop trial."""

    @model_validator(mode="after")
    def _check_kind(self) -> "Trial":
        if self.kind == "go":
            if self.rt_ms is None:
                raise ValueError(f"go trial {self.index} has no rt_ms")
            if self.ssd_ms is not None or self.inhibited is not None:
                raise ValueError(f"go trial {self.index} must not carry ssd_ms or inhibited")
        else:
            if self.ssd_ms is None:
                raise ValueError(f"stop trial {self.index} has no ssd_ms")
            if self.inhibited is None:
                raise ValueError(f"stop trial {self.index} has no inhibited flag")
            if self.inhibited != (self.rt_ms is None):
                raise ValueError(f"stop trial {self.index}: inhibited must hold iff rt_ms is absent")
        return self

    @property
    def is_stop(self) -> bool:
        return self.kind == "stop"


class SessionMeta(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_trials: int = Field(ge=0)
    stop_fraction: float = Field(ge=0.0, le=1.0)
    initial_ssd_ms: Optional[float] = None
    step_ms: Optional[float] = None
    seed: Optional[int] = None


class SstDataset(BaseModel):
    """An ordered stop-signal task session (or a cluster view of one)."""

    model_config = ConfigDict(frozen=True)

    trials: List[Trial]
    meta: SessionMeta

    @model_validator(mode="after")
    def _check_counts(self) -> "SstDataset":
        if len(self.trials) != self.meta.n_trials:
            raise ValueError(
                f"meta.n_trials={self.meta.n_trials} but {len(self.trials)} trials present"
            )
        indices = [t.index for t in self.trials]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError("trial indices must be strictly increasing")
        return self

    def go_trials(self) -> List[Trial]:
        return [t for t in self.trials if t.kind == "go"]

    def stop_trials(self) -> List[Trial]:
        return [t for t in self.trials if t.kind == "stop"]

    def go_rts(self) -> np.ndarray:
        return np.array([t.rt_ms for t in self.trials if t.kind == "go"], dtype=float)

    def stop_ssds(self) -> np.ndarray:
        return np.array([t.ssd_ms for t in self.trials if t.kind == "stop"], dtype=float)

    def inhibition_rate(self) -> float:
        stops = self.stop_trials()
        if not stops:
            return float("nan")
        return sum(1 for t in stops if t.inhibited) / len(stops)


class DesignConfig(BaseModel):
    """Stop-signal task design; defaults are 4 blocks of 24 trials, 25% stop."""

    model_config = ConfigDict(frozen=True)

    n_trials: int = Field(96, ge=1)
    stop_fraction: float = 0.25
    initial_ssd_ms: float = Field(250.0, ge=0.0)
    step_ms: float = Field(50.0, ge=0.0)
    block_size: int = Field(24, ge=1)
    placement: Literal["block", "bernoulli"] = "block"
    """`block`: exactly ceil(stop_fraction * block_size) stops per block.
    `bernoulli`: each trial is a stop trial independently with stop_fraction."""
    tracking: bool = True
    """False keeps the SSD constant at initial_ssd_ms."""
    min_ssd_ms: float = Field(0.0, ge=0.0)


class ClusterPartition(BaseModel):
    """Type-A / type-B partition of trials 2..N by the kind of the preceding trial."""

    model_config = ConfigDict(frozen=True)

    go_a: List[int]
    go_b: List[int]
    stop_a: List[int]
    stop_b: List[int]
    w_a: float = Field(ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_disjoint(self) -> "ClusterPartition":
        sets = [set(self.go_a), set(self.go_b), set(self.stop_a), set(self.stop_b)]
        if sum(len(s) for s in sets) != len(set().union(*sets)):
            raise ValueError("partition sets must be disjoint")
        return self

    @property
    def type_a(self) -> List[int]:
        return sorted(self.go_a + self.stop_a)

    @property
    def type_b(self) -> List[int]:
        return sorted(self.go_b + self.stop_b)


class ClusterViews(BaseModel):
    model_config = ConfigDict(frozen=True)

    full: SstDataset
    type_a: SstDataset
    type_b: SstDataset
    w_a: float

    def by_cluster(self, cluster: Cluster) -> SstDataset:
        return {"S": self.full, "A": self.type_a, "B": self.type_b}[cluster]


# ======================================================================
# 3. CONSTANT SSRT INDICES
# ======================================================================


class ConstantSsrtReport(BaseModel):
    crude_ms: float
    logan1994_ms: float
    weighted_ms: float
    ssrt_a_ms: Optional[float]
    """None when no type-A stop trials exist (w_a == 0)."""
    ssrt_b_ms: Optional[float]
    """None when no type-B stop trials exist (w_a == 1)."""
    w_a: float = Field(ge=0.0, le=1.0)
    p_inhibit: float = Field(ge=0.0, le=1.0)
    mean_ssd_ms: float
    go_source: Literal["cluster", "all"] = "cluster"

    @model_validator(mode="after")
    def _check_weighting(self) -> "ConstantSsrtReport":
        part_a = self.w_a * self.ssrt_a_ms if self.ssrt_a_ms is not None else 0.0
        part_b = (1.0 - self.w_a) * self.ssrt_b_ms if self.ssrt_b_ms is not None else 0.0
        if abs(self.weighted_ms - (part_a + part_b)) > 1e-9 * max(1.0, abs(self.weighted_ms)):
            raise ValueError("weighted_ms must equal w_a*ssrt_a + (1-w_a)*ssrt_b")
        return self


# ======================================================================
# 4. BAYESIAN ESTIMATION
# ======================================================================


class RaceLikelihoodInput(BaseModel):
    """Observed data entering the censored race likelihood."""

    model_config = ConfigDict(frozen=True)

    go_rts: List[float] = Field(default_factory=list)
    signal_respond: List[Tuple[float, float]] = Field(default_factory=list)
    """(rt_ms, ssd_ms) of every failed stop trial."""
    signal_inhibit: List[float] = Field(default_factory=list)
    """ssd_ms of every successfully inhibited stop trial."""

    @model_validator(mode="after")
    def _check_values(self) -> "RaceLikelihoodInput":
        values = list(self.go_rts) + [v for pair in self.signal_respond for v in pair]
        values += list(self.signal_inhibit)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("all times must be finite")
        if any(rt <= 0 for rt, _ in self.signal_respond):
            raise ValueError("signal-respond RTs must be > 0")
        return self

    @property
    def n_stop(self) -> int:
        return len(self.signal_respond) + len(self.signal_inhibit)


class IbpaConfig(BaseModel):
    """Settings of one individual Bayesian fit."""

    model_config = ConfigDict(frozen=True)

    n_chains: int = Field(3, ge=1)
    n_iter: int = Field(20000, ge=2)
    n_burn: int = Field(5000, ge=0)
    prior_lo: float = PRIOR_LO
    prior_hi: float = PRIOR_HI
    seed: int = 0
    truncate: Optional[Tuple[float, float]] = None
    """Truncate go and stop densities to this window, e.g. (1, 1000)."""
    integral: Literal["closed-form", "quadrature"] = "closed-form"
    use_likelihood: bool = True
    """False samples the prior only."""
    target_acceptance: float = Field(0.44, gt=0.0, lt=1.0)
    adapt_interval: int = Field(50, ge=1)
    threads: int = Field(1, ge=1)
    progress: bool = False

    @model_validator(mode="after")
    def _check_ranges(self) -> "IbpaConfig":
        if self.n_burn >= self.n_iter:
            raise ValueError("n_burn must be smaller than n_iter")
        if not self.prior_lo < self.prior_hi:
            raise ValueError("prior_lo must be smaller than prior_hi")
        if self.truncate is not None and not self.truncate[0] < self.truncate[1]:
            raise ValueError("truncate must be an increasing (lo, hi) pair")
        return self


class ParameterSummary(BaseModel):
    mean: float
    sd: float = Field(ge=0.0)
    lo95: float
    hi95: float


class PosteriorSummary(BaseModel):
    parameters: Dict[str, ParameterSummary]

    def means(self) -> Dict[str, float]:
        return {name: s.mean for name, s in self.parameters.items()}

    def triple(self, names: Tuple[str, str, str]) -> ExGaussianParams:
        mu, sigma, tau = (self.parameters[n].mean for n in names)
        return ExGaussianParams(mu=mu, sigma=sigma, tau=tau)

    def theta_go(self) -> ExGaussianParams:
        return self.triple(GO_PARAMS)

    def theta_stop(self) -> ExGaussianParams:
        return self.triple(STOP_PARAMS)


class PosteriorChains(BaseModel):
    """Every MCMC draw, burn-in included, with per-chain diagnostics."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    draws: np.ndarray
    """Array of shape (n_chains, n_iter, n_params)."""
    param_names: List[str]
    n_burn: int
    n_iter: int
    acceptance_rates: List[List[float]]
    """Post-burn-in acceptance rate per chain and coordinate."""
    rhat: Dict[str, float]

    @model_validator(mode="after")
    def _check_shape(self) -> "PosteriorChains":
        if self.draws.ndim != 3 or self.draws.shape[1] != self.n_iter:
            raise ValueError(f"draws must have shape (chains, {self.n_iter}, params)")
        if self.draws.shape[2] != len(self.param_names):
            raise ValueError("one draw column per parameter name is required")
        if not self.n_burn < self.n_iter:
            raise ValueError("n_burn must be smaller than n_iter")
        return self

    def kept(self) -> np.ndarray:
        return self.draws[:, self.n_burn:, :]

    def pooled(self) -> np.ndarray:
        kept = self.kept()
        return kept.reshape(-1, kept.shape[2])


class IbpaResult(BaseModel):
    chains: PosteriorChains
    summary: PosteriorSummary
    warnings: List[str] = Field(default_factory=list)

    @property
    def converged(self) -> bool:
        return not self.warnings


class ClusterFits(BaseModel):
    """IBPA fits of the type-S, type-A and type-B views of one session."""

    fits: Dict[str, IbpaResult]
    w_a: float = Field(ge=0.0, le=1.0)

    def theta_stop(self, cluster: Cluster) -> ExGaussianParams:
        return self.fits[cluster].summary.theta_stop()

    def mixture(self) -> MixtureSsrt:
        return MixtureSsrt(w_a=self.w_a, theta_a=self.theta_stop("A"), theta_b=self.theta_stop("B"))


class SubjectTriples(BaseModel):
    """Per-subject stage-1 posterior-mean SSRT triples of one cluster type."""

    rows: List[Tuple[float, float, float]]
    cluster: Cluster = "S"
    subjects: Optional[List[str]] = None

    @model_validator(mode="after")
    def _check_rows(self) -> "SubjectTriples":
        if any(not (v > 0 and math.isfinite(v)) for row in self.rows for v in row):
            raise ValueError("subject triples must be finite and positive")
        if self.subjects is not None and len(self.subjects) != len(self.rows):
            raise ValueError("one subject label per row is required")
        return self

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float).reshape(-1, 3)


class Stage2Config(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_chains: int = Field(3, ge=1)
    n_iter: int = Field(100000, ge=2)
    n_burn: int = Field(5000, ge=0)
    seed: int = 0
    location_prior_sd: float = Field(1000.0, gt=0.0)
    """Prior sd of mu_mu and all regression coefficients."""
    scale_prior_sd: float = Field(10.0, gt=0.0)
    """Half-normal prior sd of the three residual scales."""
    scale_upper: float = Field(1000.0, gt=0.0)
    fix_slopes_zero: bool = False
    """Hold beta21, beta31, beta32 at zero (uncorrelated limit)."""
    threads: int = Field(1, ge=1)
    progress: bool = False

    @model_validator(mode="after")
    def _check_burn(self) -> "Stage2Config":
        if self.n_burn >= self.n_iter:
            raise ValueError("n_burn must be smaller than n_iter")
        return self


class Stage2Posterior(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    cluster: Cluster
    draws: np.ndarray
    """Kept draws, shape (n_chains, n_iter - n_burn, 9), columns STAGE2_PARAMS."""
    param_names: List[str] = Field(default_factory=lambda: list(STAGE2_PARAMS))
    overall_triple: Tuple[float, float, float]
    """Posterior mean of the implied population mean vector (mu, sigma, tau)."""
    implied_correlations: Dict[str, float]
    rhat: Dict[str, float]
    summary: PosteriorSummary
    n_subjects: int
    warnings: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_scales(self) -> "Stage2Posterior":
        if not all(math.isfinite(v) for v in self.overall_triple):
            raise ValueError("overall triple must be finite")
        return self

    def overall(self) -> ExGaussianParams:
        mu, sigma, tau = self.overall_triple
        return ExGaussianParams(mu=mu, sigma=sigma, tau=tau)


class OverallDistributions(BaseModel):
    single: ExGaussianParams
    mixture: MixtureSsrt


# ======================================================================
# 5. STOCHASTIC-ORDER TESTS
# ======================================================================


class KsResult(BaseModel):
    statistic: float = Field(ge=0.0, le=1.0)
    p_value: float = Field(ge=0.0, le=1.0)
    alternative: Alternative = "two-sided"
    n: int
    m: int


class PspdtConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(44, ge=1)
    n: int = Field(96, ge=2)
    m: int = Field(96, ge=2)
    alpha: float = 0.05
    alternative: Alternative = "two-sided"
    critical: Literal["standard", "printed"] = "standard"
    """`printed` uses the constant sqrt(-ln(1/2)/2) regardless of alpha."""
    sampling: Literal["random", "quantile"] = "random"
    n_null: int = Field(200, ge=0)
    """Null replicates for the Monte-Carlo p-value; 0 disables it."""
    seed: int = 0
    threads: int = Field(1, ge=1)


class PspdtResult(BaseModel):
    d_bar: float
    k: int
    n: int
    m: int
    alpha: float
    alternative: Alternative
    coefficient: float
    critical_value: float
    reject: bool
    per_k: List[float]
    mc_p_value: Optional[float] = None
    sampling: Literal["random", "quantile"] = "random"

    @model_validator(mode="after")
    def _check_decision(self) -> "PspdtResult":
        if len(self.per_k) != self.k:
            raise ValueError("one statistic per replicate is required")
        if abs(self.d_bar - float(np.mean(self.per_k))) > 1e-12:
            raise ValueError("d_bar must be the mean of per_k")
        if self.reject != (self.d_bar > self.critical_value):
            raise ValueError("reject must hold iff d_bar exceeds the critical value")
        return self


class PairedTResult(BaseModel):
    mean_diff: float
    ci95: Tuple[float, float]
    t_statistic: Optional[float]
    df: int
    p_value: Optional[float]
    p_undefined: bool = False
    """True when the differences have zero variance."""


class ComparisonRow(BaseModel):
    """One comparison of two distributions under all three alternatives.

    Rows hold single-pair KS results for individual subjects and averaged
    PSPDT results for overall distributions.
    """

    label: str
    two_sided: Union[PspdtResult, KsResult]
    greater: Union[PspdtResult, KsResult]
    less: Union[PspdtResult, KsResult]


# ======================================================================
# 6. WEIGHT SWEEP
# ======================================================================


class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid_points: int = Field(101, ge=2)
    """Evenly spaced weights on [0, 1]."""
    pspdt: Optional[PspdtConfig] = None
    """When set, a PSPDT of single vs mixture is run at every grid weight."""


class SubjectClusterParams(BaseModel):
    subject: Optional[str] = None
    theta_s: ExGaussianParams
    theta_a: ExGaussianParams
    theta_b: ExGaussianParams
    w_a: Optional[float] = Field(None, ge=0.0, le=1.0)


class WeightSweep(BaseModel):
    grid: List[float]
    delta_mean: List[float]
    delta_var: List[float]
    mean_coefficients: Tuple[float, float]
    """(slope, intercept) of delta_mean in w."""
    var_coefficients: Tuple[float, float, float]
    """(a2, a1, a0) of delta_var = a2 w^2 + a1 w + a0."""
    argmax_var_w: Optional[float] = Field(None, ge=0.0, le=1.0)
    """Maximizer of delta_var on [0, 1]; None when all E_A == E_B."""
    pspdt_stat: Optional[List[float]] = None
    pspdt_cutoff: Optional[float] = None
    pspdt_mc_p: Optional[List[Optional[float]]] = None


# ======================================================================
# 7. PIPELINE REPORTS
# ======================================================================


class SubjectReport(BaseModel):
    """Per-subject pipeline row: cluster SSRTs, weight and the single-vs-mixture KS test."""

    subject: str
    w_a: float = Field(ge=0.0, le=1.0)
    n_stop_a: int
    n_stop_b: int
    theta_s: ExGaussianParams
    theta_a: ExGaussianParams
    theta_b: ExGaussianParams
    single_mean_ms: float
    mixture_mean_ms: float
    ks: ComparisonRow
    warnings: List[str] = Field(default_factory=list)

    @property
    def d(self) -> float:
        return self.ks.two_sided.statistic if isinstance(self.ks.two_sided, KsResult) else self.ks.two_sided.d_bar
