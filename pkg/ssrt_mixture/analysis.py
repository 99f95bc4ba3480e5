"""
analysis.py

Colonius retrieval of the SSRT cdf from race-model quantities, in single and
two-cluster mixture form, and the weight sweep comparing the mixture SSRT
with the single SSRT as the type-A weight moves over [0, 1].
"""

import math
from typing import List, Optional, Sequence

import numpy as np

from logging_config import get_logger

from .bayesfit import inhibit_probability
from .errors import NumericalError, ParameterDomainError
from .exgauss import as_params, exg_logpdf, exg_logsf
from .mixture import make_mixture
from .sotest import ALTERNATIVES, ks_two_sample, pspdt, sample_distribution
from .types import (
    ComparisonRow,
    ExGaussianParams,
    MixtureSsrt,
    SubjectClusterParams,
    SweepConfig,
    WeightSweep,
)
from .utils import check_probability, make_rng, parallel_map

logger = get_logger(__name__)

# exp() of anything below this underflows to zero
_LOG_TINY = math.log(np.finfo(float).tiny)


def colonius_cdf(go: ExGaussianParams, stop: ExGaussianParams, t_d: float, t):
    """
    F_stop(t) = 1 - f_SRRT(t + t_d | t_d) * (1 - P(SI | t_d)) / f_go(t + t_d).

    P(SI | t_d) is integrated by adaptive quadrature and the signal-respond
    density is the race-model one, f_go(r) * (1 - F_stop(r - t_d)) / (1 - P(SI | t_d)).
    With that density the P(SI) and f_go factors cancel and the result is
    exactly 1 - S_stop(t), so this shows the inversion is exact under the
    race model; it is not an independent estimate of F_stop.

    Raises:
        ParameterDomainError: t or t_d not strictly positive.
        NumericalError: f_go(t + t_d) underflows or P(SI | t_d) is 1.
    """
    go, stop = as_params(go), as_params(stop)
    arr = np.asarray(t, dtype=float)
    if t_d <= 0:
        raise ParameterDomainError(f"t_d must be > 0, got {t_d}")
    if np.any(arr <= 0):
        raise ParameterDomainError("t must be > 0")

    p_si = inhibit_probability(go, stop, t_d, method="quadrature")
    if p_si >= 1.0:
        raise NumericalError("P(SI | t_d) is 1; signal-respond density undefined", {"t_d": t_d})
    log_respond = math.log1p(-p_si)

    log_f_go = np.asarray(exg_logpdf(go, arr + t_d))
    if np.any(log_f_go < _LOG_TINY):
        raise NumericalError(
            "go density underflows at t + t_d; Colonius ratio undefined",
            {"t_d": t_d, "min_log_f_go": float(log_f_go.min())},
        )
    log_f_srrt = log_f_go + np.asarray(exg_logsf(stop, arr)) - log_respond
    out = 1.0 - np.exp(log_f_srrt + log_respond - log_f_go)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if arr.ndim == 0 else out


def colonius_mixture_cdf(
    go_a: ExGaussianParams,
    stop_a: ExGaussianParams,
    t_da: float,
    go_b: ExGaussianParams,
    stop_b: ExGaussianParams,
    t_db: float,
    w_a: float,
    t,
):
    """Cluster-weighted Colonius retrieval: w_a F_A(t) + (1 - w_a) F_B(t)."""
    check_probability(w_a, "w_a", open_interval=False)
    if w_a == 1.0:
        return colonius_cdf(go_a, stop_a, t_da, t)
    if w_a == 0.0:
        return colonius_cdf(go_b, stop_b, t_db, t)
    return w_a * colonius_cdf(go_a, stop_a, t_da, t) + (1.0 - w_a) * colonius_cdf(go_b, stop_b, t_db, t)


def weight_sweep(
    cohort: Sequence[SubjectClusterParams],
    config: Optional[SweepConfig] = None,
    grid: Optional[Sequence[float]] = None,
) -> WeightSweep:
    """
    Cohort-averaged mean and variance gaps between the mixture and single SSRT.

    Per subject, with d = E_A - E_B,
        mix mean - E_S = d w + (E_B - E_S)
        mix var - V_S  = -d^2 w^2 + (d^2 + V_A - V_B) w + (V_B - V_S)
    and the sweep averages the coefficients over subjects, so the leading
    variance coefficient is -avg(d^2) rather than -(avg d)^2.
    """
    config = config or SweepConfig()
    if not cohort:
        raise ParameterDomainError("weight sweep needs a non-empty cohort")
    w = np.asarray(grid, dtype=float) if grid is not None else np.linspace(0.0, 1.0, config.grid_points)
    if np.any((w < 0) | (w > 1)):
        raise ParameterDomainError("sweep weights must lie in [0, 1]")

    e_s = np.array([c.theta_s.mean for c in cohort])
    e_a = np.array([c.theta_a.mean for c in cohort])
    e_b = np.array([c.theta_b.mean for c in cohort])
    v_s = np.array([c.theta_s.variance for c in cohort])
    v_a = np.array([c.theta_a.variance for c in cohort])
    v_b = np.array([c.theta_b.variance for c in cohort])
    d2 = np.mean((e_a - e_b) ** 2)

    slope = float(np.mean(e_a - e_b))
    intercept = float(np.mean(e_b - e_s))
    a2 = float(-d2)
    a1 = float(d2 + np.mean(v_a - v_b))
    a0 = float(np.mean(v_b - v_s))
    # constrained maximizer of a concave quadratic on [0, 1]
    argmax = float(np.clip(a1 / (2.0 * d2), 0.0, 1.0)) if d2 > 0 else None

    sweep = WeightSweep(
        grid=w.tolist(),
        delta_mean=(slope * w + intercept).tolist(),
        delta_var=(a2 * w ** 2 + a1 * w + a0).tolist(),
        mean_coefficients=(slope, intercept),
        var_coefficients=(a2, a1, a0),
        argmax_var_w=argmax,
    )
    if config.pspdt is None:
        return sweep

    single = _average_params([c.theta_s for c in cohort])
    theta_a = _average_params([c.theta_a for c in cohort])
    theta_b = _average_params([c.theta_b for c in cohort])
    results = parallel_map(
        lambda wi: pspdt(single, make_mixture(float(wi), theta_a, theta_b), config.pspdt),
        w,
        config.pspdt.threads,
    )
    logger.info(f"Weight sweep: PSPDT at {len(w)} weights")
    return sweep.model_copy(update={
        "pspdt_stat": [r.d_bar for r in results],
        "pspdt_cutoff": results[0].critical_value,
        "pspdt_mc_p": [r.mc_p_value for r in results],
    })


def _average_params(params: Sequence[ExGaussianParams]) -> ExGaussianParams:
    arr = np.array([p.as_tuple() for p in params])
    mu, sigma, tau = arr.mean(axis=0)
    return ExGaussianParams(mu=float(mu), sigma=float(sigma), tau=float(tau))


def individual_comparison(
    theta_s: ExGaussianParams,
    mixture: MixtureSsrt,
    n: int = 96,
    m: int = 96,
    seed=None,
    label: str = "single vs mixture",
) -> ComparisonRow:
    """KS test of one subject's single SSRT against its mixture SSRT on n and m draws."""
    rng = make_rng(seed)
    x = sample_distribution(as_params(theta_s), n, rng)
    y = sample_distribution(mixture, m, rng)
    results = {alt: ks_two_sample(x, y, alt) for alt in ALTERNATIVES}
    return ComparisonRow(
        label=label,
        two_sided=results["two-sided"],
        greater=results["greater"],
        less=results["less"],
    )
