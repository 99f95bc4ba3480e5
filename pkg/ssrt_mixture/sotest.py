"""
sotest.py

Stochastic-order tests: the two-sample Kolmogorov-Smirnov test, the paired
samples parametric distribution test (PSPDT) that averages KS statistics over
K simulated sample pairs, and the paired t-test.

Alternatives follow scipy.stats.ks_2samp: with F and G the empirical cdfs of
x and y, `greater` uses max(F - G) and `less` uses max(G - F). Rejecting
H0 under `greater` therefore supports x being stochastically smaller than y.
"""

import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import special, stats

from logging_config import get_logger

from .errors import ParameterDomainError, PreconditionError
from .exgauss import exg_quantile, exg_sample
from .mixture import mixture_quantile, mixture_sample
from .types import (
    Alternative,
    ComparisonRow,
    Distribution,
    ExGaussianParams,
    KsResult,
    OverallDistributions,
    PairedTResult,
    PspdtConfig,
    PspdtResult,
)
from .utils import as_sample, check_probability, make_rng, parallel_map, spawn_seeds

logger = get_logger(__name__)

ALTERNATIVES = ("two-sided", "greater", "less")

# sqrt(-ln(1/2) / 2), the alpha-free coefficient kept for compatibility runs
PRINTED_COEFFICIENT = math.sqrt(-0.5 * math.log(0.5))


def ks_statistic(x: np.ndarray, y: np.ndarray, alternative: Alternative = "two-sided") -> float:
    """KS distance between the empirical cdfs, evaluated at every pooled point."""
    x = np.sort(x)
    y = np.sort(y)
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / x.size
    cdf_y = np.searchsorted(y, pooled, side="right") / y.size
    if alternative == "greater":
        return float(max(0.0, np.max(cdf_x - cdf_y)))
    if alternative == "less":
        return float(max(0.0, np.max(cdf_y - cdf_x)))
    return float(np.max(np.abs(cdf_x - cdf_y)))


def ks_p_value(d: float, n: int, m: int, alternative: Alternative = "two-sided") -> float:
    """Asymptotic p-value: Kolmogorov survival (two-sided) or exp(-2 en^2 D^2) (one-sided)."""
    en2 = n * m / (n + m)
    if alternative == "two-sided":
        p = float(special.kolmogorov(math.sqrt(en2) * d))
    else:
        p = math.exp(-2.0 * en2 * d * d)
    return min(1.0, max(0.0, p))


def ks_two_sample(x: Sequence[float], y: Sequence[float], alternative: Alternative = "two-sided") -> KsResult:
    """
    Two-sample Kolmogorov-Smirnov test.

    Raises:
        ParameterDomainError: an empty or non-finite sample, or an unknown alternative.
    """
    if alternative not in ALTERNATIVES:
        raise ParameterDomainError(f"unknown alternative {alternative!r}")
    x = as_sample(x, "x")
    y = as_sample(y, "y")
    d = ks_statistic(x, y, alternative)
    return KsResult(
        statistic=d,
        p_value=ks_p_value(d, x.size, y.size, alternative),
        alternative=alternative,
        n=x.size,
        m=y.size,
    )


def critical_coefficient(alpha: float, alternative: Alternative = "two-sided", critical: str = "standard") -> float:
    """c(alpha) of the KS cutoff c(alpha) * sqrt(1/n + 1/m)."""
    check_probability(alpha, "alpha")
    if critical == "printed":
        return PRINTED_COEFFICIENT
    if alternative == "two-sided":
        return math.sqrt(-0.5 * math.log(alpha / 2.0))
    return math.sqrt(-0.5 * math.log(alpha))


def sample_distribution(dist: Distribution, n: int, seed) -> np.ndarray:
    if isinstance(dist, ExGaussianParams):
        return exg_sample(dist, n, seed)
    return mixture_sample(dist, n, seed)


def quantile_grid(dist: Distribution, n: int) -> np.ndarray:
    """Quantiles at the plotting positions (i - 0.5) / n."""
    probs = (np.arange(1, n + 1) - 0.5) / n
    if isinstance(dist, ExGaussianParams):
        return np.asarray(exg_quantile(dist, probs))
    return np.array([mixture_quantile(dist, float(p)) for p in probs])


def _null_d_bar(config: PspdtConfig, seed) -> float:
    """Averaged KS statistic of K uniform sample pairs; the KS null is distribution-free."""
    rng = make_rng(seed)
    return float(np.mean([
        ks_statistic(rng.random(config.n), rng.random(config.m), config.alternative)
        for _ in range(config.k)
    ]))


def pspdt(dist1: Distribution, dist2: Distribution, config: Optional[PspdtConfig] = None) -> PspdtResult:
    """
    Paired samples parametric distribution test.

    Draws K independent pairs (n values from dist1, m from dist2), averages the
    K KS statistics and rejects when the average exceeds
    c(alpha) * sqrt(1/n + 1/m). With K = 1 this is the ordinary two-sample test.
    A Monte-Carlo p-value compares the average with `n_null` null replicates.
    """
    config = config or PspdtConfig()
    coefficient = critical_coefficient(config.alpha, config.alternative, config.critical)
    cutoff = coefficient * math.sqrt(1.0 / config.n + 1.0 / config.m)

    if config.sampling == "quantile":
        d = ks_statistic(quantile_grid(dist1, config.n), quantile_grid(dist2, config.m), config.alternative)
        per_k = [d] * config.k
    else:
        seeds = spawn_seeds(config.seed, config.k)

        def replicate(k: int) -> float:
            rng = make_rng(seeds[k])
            x = sample_distribution(dist1, config.n, rng)
            y = sample_distribution(dist2, config.m, rng)
            return ks_statistic(x, y, config.alternative)

        per_k = parallel_map(replicate, range(config.k), config.threads)

    d_bar = float(np.mean(per_k))
    mc_p = None
    if config.n_null > 0 and config.sampling == "random":
        null_seeds = np.random.SeedSequence([config.seed, 1]).spawn(config.n_null)
        null = np.array(parallel_map(lambda s: _null_d_bar(config, s), null_seeds, config.threads))
        mc_p = float((1 + np.sum(null >= d_bar)) / (config.n_null + 1))

    result = PspdtResult(
        d_bar=d_bar,
        k=config.k,
        n=config.n,
        m=config.m,
        alpha=config.alpha,
        alternative=config.alternative,
        coefficient=coefficient,
        critical_value=cutoff,
        reject=d_bar > cutoff,
        per_k=per_k,
        mc_p_value=mc_p,
        sampling=config.sampling,
    )
    logger.info(
        f"PSPDT ({config.alternative}): d_bar {d_bar:.4f} vs cutoff {cutoff:.4f} -> "
        f"{'reject' if result.reject else 'retain'}"
    )
    return result


def null_rejection_rate(dist: Distribution, config: Optional[PspdtConfig] = None, n_runs: int = 200) -> float:
    """Fraction of seeded PSPDT runs with dist1 = dist2 that reject."""
    config = config or PspdtConfig()
    if n_runs < 1:
        raise ParameterDomainError(f"n_runs must be >= 1, got {n_runs}")
    rejections = 0
    for run in range(n_runs):
        run_config = config.model_copy(update={"seed": config.seed + run, "n_null": 0})
        rejections += pspdt(dist, dist, run_config).reject
    rate = rejections / n_runs
    logger.info(f"PSPDT null rejection rate {rate:.3f} over {n_runs} runs at alpha {config.alpha}")
    return rate


def compare_overall(
    overall: OverallDistributions, config: Optional[PspdtConfig] = None
) -> List[ComparisonRow]:
    """PSPDT of single vs mixture, single vs B, single vs A and B vs A, under all alternatives."""
    config = config or PspdtConfig()
    single = overall.single
    mix = overall.mixture
    pairs = [
        ("single vs mixture", single, mix),
        ("single vs B", single, mix.theta_b),
        ("single vs A", single, mix.theta_a),
        ("B vs A", mix.theta_b, mix.theta_a),
    ]
    rows = []
    for label, first, second in pairs:
        results = {
            alt: pspdt(first, second, config.model_copy(update={"alternative": alt}))
            for alt in ALTERNATIVES
        }
        rows.append(ComparisonRow(
            label=label,
            two_sided=results["two-sided"],
            greater=results["greater"],
            less=results["less"],
        ))
    return rows


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> PairedTResult:
    """
    Paired t-test on a - b with a two-sided p-value from t(n - 1).

    Differences with zero variance return the mean difference with
    `p_undefined` set and no t statistic.
    """
    a = as_sample(a, "a")
    b = as_sample(b, "b")
    if a.size != b.size:
        raise ParameterDomainError(f"paired samples differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise PreconditionError("paired t-test needs at least 2 pairs")

    diff = a - b
    mean = float(diff.mean())
    if float(diff.std(ddof=1)) == 0.0:
        return PairedTResult(mean_diff=mean, ci95=(mean, mean), t_statistic=None, df=diff.size - 1, p_value=None, p_undefined=True)

    res = stats.ttest_rel(a, b)
    ci = res.confidence_interval(0.95)
    return PairedTResult(
        mean_diff=mean,
        ci95=(float(ci.low), float(ci.high)),
        t_statistic=float(res.statistic),
        df=int(res.df),
        p_value=float(res.pvalue),
    )
