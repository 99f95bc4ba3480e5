"""
mixture.py

Two-state mixture SSRT: with probability w_a the latency is drawn from
component A, otherwise from component B. Sampling treats the weight as a
Bernoulli selector per draw; moments and shape statistics treat it as a
constant mixing proportion.
"""

import math
from typing import Tuple

import numpy as np
from pydantic import ValidationError
from scipy import optimize

from .errors import NumericalError, ParameterDomainError
from .exgauss import (
    ArrayLike,
    as_params,
    exg_cdf,
    exg_logpdf,
    exg_moments,
    exg_pdf,
    exg_sample,
    exg_sf,
    shape_from_raw_moments,
)
from .types import MixtureSsrt, MomentSummary
from .utils import SeedLike, check_probability, make_rng


def make_mixture(w_a: float, theta_a, theta_b) -> MixtureSsrt:
    """Build a MixtureSsrt from a weight and two (mu, sigma, tau) triples."""
    try:
        return MixtureSsrt(w_a=w_a, theta_a=as_params(theta_a), theta_b=as_params(theta_b))
    except ValidationError as exc:
        raise ParameterDomainError(f"invalid mixture weight {w_a}") from exc


def mixture_pdf(m: MixtureSsrt, t: ArrayLike):
    return m.w_a * exg_pdf(m.theta_a, t) + m.w_b * exg_pdf(m.theta_b, t)


def mixture_logpdf(m: MixtureSsrt, t: ArrayLike):
    with np.errstate(divide="ignore"):
        out = np.logaddexp(
            np.log(m.w_a) + np.asarray(exg_logpdf(m.theta_a, t)),
            np.log(m.w_b) + np.asarray(exg_logpdf(m.theta_b, t)),
        )
    return float(out) if np.ndim(out) == 0 else out


def mixture_cdf(m: MixtureSsrt, t: ArrayLike):
    return m.w_a * exg_cdf(m.theta_a, t) + m.w_b * exg_cdf(m.theta_b, t)


def mixture_sf(m: MixtureSsrt, t: ArrayLike):
    return m.w_a * exg_sf(m.theta_a, t) + m.w_b * exg_sf(m.theta_b, t)


def mixture_sample(m: MixtureSsrt, n: int, seed: SeedLike = None, return_labels: bool = False):
    """
    Draw n latencies: a Bernoulli(w_a) selector per draw, then that component.

    With return_labels, also returns the boolean selector (True = component A).
    """
    if n < 0:
        raise ParameterDomainError(f"sample size must be >= 0, got {n}")
    rng = make_rng(seed)
    is_a = rng.random(n) < m.w_a
    out = np.empty(n, dtype=float)
    n_a = int(is_a.sum())
    out[is_a] = exg_sample(m.theta_a, n_a, rng)
    out[~is_a] = exg_sample(m.theta_b, n - n_a, rng)
    if return_labels:
        return out, is_a
    return out


def mixture_quantile(m: MixtureSsrt, p: float, xtol: float = 1e-10) -> float:
    """Inverse mixture cdf by bisection; no closed form exists."""
    check_probability(p, "p")

    def g(t: float) -> float:
        if p <= 0.5:
            return float(mixture_cdf(m, t)) - p
        return (1.0 - p) - float(mixture_sf(m, t))

    thetas = (m.theta_a, m.theta_b)
    lo = min(th.mu - 10 * th.sigma for th in thetas)
    hi = max(th.mu + 10 * th.sigma + 100 * th.tau for th in thetas)
    width = hi - lo
    for _ in range(60):
        if g(lo) <= 0 and g(hi) >= 0:
            break
        if g(lo) > 0:
            lo -= width
        if g(hi) < 0:
            hi += width
    else:
        raise NumericalError(f"could not bracket mixture quantile p={p}", {"lo": lo, "hi": hi})
    return float(optimize.bisect(g, lo, hi, xtol=xtol, maxiter=500))


def mixture_moments(m: MixtureSsrt) -> Tuple[float, float, float, float]:
    """E[M^k] = w_a E[A^k] + (1 - w_a) E[B^k] for k = 1..4."""
    raw_a = exg_moments(m.theta_a)
    raw_b = exg_moments(m.theta_b)
    return tuple(m.w_a * a + m.w_b * b for a, b in zip(raw_a, raw_b))


def mixture_shape(m: MixtureSsrt) -> Tuple[float, float, float]:
    """(variance, skewness, kurtosis) from the mixture raw moments."""
    return shape_from_raw_moments(mixture_moments(m))


def mixture_variance_decomposition(m: MixtureSsrt) -> float:
    """Within plus between component variance; equals mixture_shape(m)[0]."""
    mean_a, mean_b = m.theta_a.mean, m.theta_b.mean
    return (
        m.w_a * m.theta_a.variance
        + m.w_b * m.theta_b.variance
        + m.w_a * m.w_b * (mean_a - mean_b) ** 2
    )


def mixture_summary(m: MixtureSsrt) -> MomentSummary:
    raw = mixture_moments(m)
    variance, skewness, kurtosis = shape_from_raw_moments(raw)
    return MomentSummary(
        raw_moments=raw,
        mean=raw[0],
        variance=variance,
        sd=math.sqrt(variance),
        skewness=skewness,
        kurtosis=kurtosis,
    )
