"""
exgauss.py

Ex-Gaussian distribution: X = Normal(mu, sigma^2) + Exponential(tau).

The density is evaluated in log-space. With x = (t - mu)/sigma, s = sigma/tau
and z = x - s,

    log f(t) = -log tau - x*s + s^2/2 + log Phi(z)

which overflows in the exp(.)*Phi(.) product when s is large. For z < 0 the
same quantity is rewritten through the scaled complementary error function,

    log f(t) = -log tau - x^2/2 + log(erfcx(-z/sqrt 2) / 2)

and both branches stay finite for every finite t. The cdf, survival function
and their logs follow from F(t) = Phi(x) - tau*f(t).

The `log_density`, `log_cdf` and `log_sf` functions broadcast over numpy
arrays of t and parameters; the `exg_*` functions take an ExGaussianParams.
"""

import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy import optimize, special

from .errors import NumericalError, ParameterDomainError
from .types import ExGaussianParams, MomentSummary
from .utils import SeedLike, check_probability, make_rng

ParamsLike = Union[ExGaussianParams, Sequence[float]]
ArrayLike = Union[float, Sequence[float], np.ndarray]

_SQRT2 = math.sqrt(2.0)

# quantile bracket, in units of sigma and tau
_BRACKET_SIGMAS = 10.0
_BRACKET_TAUS = 100.0


def as_params(params: ParamsLike) -> ExGaussianParams:
    """Coerce a (mu, sigma, tau) triple to ExGaussianParams, raising ParameterDomainError."""
    if isinstance(params, ExGaussianParams):
        return params
    try:
        mu, sigma, tau = params
    except (TypeError, ValueError):
        raise ParameterDomainError(f"expected a (mu, sigma, tau) triple, got {params!r}")
    try:
        return ExGaussianParams(mu=float(mu), sigma=float(sigma), tau=float(tau))
    except ValidationError as exc:
        raise ParameterDomainError(f"invalid Ex-Gaussian parameters ({mu}, {sigma}, {tau})") from exc


def _prepare(t: ArrayLike) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


def _finish(values: np.ndarray, scalar: bool):
    return float(values) if scalar else values


# ----------------------------------------------------------------------
# Broadcasting kernels
# ----------------------------------------------------------------------


def log_tau_density(t, mu, sigma, tau) -> np.ndarray:
    """log(tau * f(t)) = log(Phi(x) - F(t)); the exponential-tail term of the cdf."""
    t, mu, sigma, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, mu, sigma, tau)))
    x = (t - mu) / sigma
    s = sigma / tau
    z = x - s
    out = np.empty(x.shape, dtype=float)
    neg = z < 0
    with np.errstate(over="ignore", divide="ignore"):
        out[neg] = -0.5 * x[neg] ** 2 + np.log(0.5 * special.erfcx(-z[neg] / _SQRT2))
        pos = ~neg
        out[pos] = -x[pos] * s[pos] + 0.5 * s[pos] ** 2 + special.log_ndtr(z[pos])
    return out


def log_density(t, mu, sigma, tau) -> np.ndarray:
    return log_tau_density(t, mu, sigma, tau) - np.log(np.asarray(tau, dtype=float))


def log_cdf(t, mu, sigma, tau) -> np.ndarray:
    x = (np.asarray(t, dtype=float) - mu) / sigma
    log_phi = special.log_ndtr(x)
    ratio = np.exp(log_tau_density(t, mu, sigma, tau) - log_phi)
    with np.errstate(divide="ignore"):
        return log_phi + np.log1p(-np.minimum(ratio, 1.0))


def log_sf(t, mu, sigma, tau) -> np.ndarray:
    x = (np.asarray(t, dtype=float) - mu) / sigma
    return np.logaddexp(special.log_ndtr(-x), log_tau_density(t, mu, sigma, tau))


# ----------------------------------------------------------------------
# Public distribution functions
# ----------------------------------------------------------------------


def exg_logpdf(params: ParamsLike, t: ArrayLike):
    p = as_params(params)
    arr, scalar = _prepare(t)
    return _finish(log_density(arr, p.mu, p.sigma, p.tau), scalar)


def exg_pdf(params: ParamsLike, t: ArrayLike):
    """Ex-Gaussian density at t (ms)."""
    p = as_params(params)
    arr, scalar = _prepare(t)
    return _finish(np.exp(log_density(arr, p.mu, p.sigma, p.tau)), scalar)


def exg_logcdf(params: ParamsLike, t: ArrayLike):
    p = as_params(params)
    arr, scalar = _prepare(t)
    return _finish(log_cdf(arr, p.mu, p.sigma, p.tau), scalar)


def exg_cdf(params: ParamsLike, t: ArrayLike):
    p = as_params(params)
    arr, scalar = _prepare(t)
    return _finish(np.exp(log_cdf(arr, p.mu, p.sigma, p.tau)), scalar)


def exg_logsf(params: ParamsLike, t: ArrayLike):
    p = as_params(params)
    arr, scalar = _prepare(t)
    return _finish(log_sf(arr, p.mu, p.sigma, p.tau), scalar)


def exg_sf(params: ParamsLike, t: ArrayLike):
    """Survival function 1 - F(t), accurate in the right tail."""
    p = as_params(params)
    arr, scalar = _prepare(t)
    return _finish(np.exp(log_sf(arr, p.mu, p.sigma, p.tau)), scalar)


def _quantile_one(p: ExGaussianParams, prob: float) -> float:
    # increasing in t on both branches; the sf form keeps upper-tail precision
    if prob <= 0.5:
        def g(t):
            return float(np.exp(log_cdf(t, p.mu, p.sigma, p.tau))) - prob
    else:
        def g(t):
            return (1.0 - prob) - float(np.exp(log_sf(t, p.mu, p.sigma, p.tau)))

    lo = p.mu - _BRACKET_SIGMAS * p.sigma
    hi = p.mu + _BRACKET_SIGMAS * p.sigma + _BRACKET_TAUS * p.tau
    width = hi - lo
    for _ in range(60):
        if g(lo) <= 0:
            break
        lo -= width
    for _ in range(60):
        if g(hi) >= 0:
            break
        hi += width
    if g(lo) > 0 or g(hi) < 0:
        raise NumericalError(
            f"could not bracket quantile p={prob}",
            {"params": p.as_tuple(), "lo": lo, "hi": hi},
        )

    root = optimize.brentq(g, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=500)
    density = float(np.exp(log_density(root, p.mu, p.sigma, p.tau)))
    if density > 0:
        polished = root - g(root) / density
        if np.isfinite(polished) and abs(g(polished)) < abs(g(root)):
            root = polished
    return float(root)


def exg_quantile(params: ParamsLike, p: ArrayLike):
    """
    Inverse cdf by bracketed root finding plus one Newton step.

    The bracket starts at [mu - 10 sigma, mu + 10 sigma + 100 tau] and is
    widened until it contains the root.
    """
    theta = as_params(params)
    arr, scalar = _prepare(p)
    for value in arr.ravel():
        check_probability(float(value), "p")
    out = np.array([_quantile_one(theta, float(v)) for v in arr.ravel()]).reshape(arr.shape)
    return _finish(out, scalar)


def exg_sample(params: ParamsLike, n: int, seed: SeedLike = None) -> np.ndarray:
    """Draw n variates as the sum of one Gaussian and one exponential variate."""
    p = as_params(params)
    if n < 0:
        raise ParameterDomainError(f"sample size must be >= 0, got {n}")
    rng = make_rng(seed)
    if n == 0:
        return np.empty(0, dtype=float)
    return rng.normal(p.mu, p.sigma, size=n) + rng.exponential(p.tau, size=n)


# ----------------------------------------------------------------------
# Moments and shape
# ----------------------------------------------------------------------


def exg_moments(params: ParamsLike) -> Tuple[float, float, float, float]:
    """First four raw moments E[X^k], k = 1..4."""
    p = as_params(params)
    mu, sigma, tau = p.as_tuple()
    s2 = sigma ** 2
    m1 = mu + tau
    m2 = mu ** 2 + s2 + 2 * mu * tau + 2 * tau ** 2
    m3 = mu ** 3 + 3 * mu * s2 + 3 * (mu ** 2 + s2) * tau + 6 * mu * tau ** 2 + 6 * tau ** 3
    m4 = (
        mu ** 4 + 6 * mu ** 2 * s2 + 3 * s2 ** 2
        + 4 * (mu ** 3 + 3 * mu * s2) * tau
        + 12 * (mu ** 2 + s2) * tau ** 2
        + 24 * mu * tau ** 3
        + 24 * tau ** 4
    )
    return (m1, m2, m3, m4)


def exg_shape(params: ParamsLike) -> Tuple[float, float, float]:
    """(variance, skewness, kurtosis); kurtosis is not excess, so 3 for a Gaussian."""
    p = as_params(params)
    s2, t2 = p.sigma ** 2, p.tau ** 2
    variance = s2 + t2
    skewness = 2.0 * (1.0 + s2 / t2) ** -1.5
    kurtosis = (3 * s2 ** 2 + 6 * s2 * t2 + 9 * t2 ** 2) / variance ** 2
    return (variance, skewness, kurtosis)


def shape_from_raw_moments(raw: Sequence[float]) -> Tuple[float, float, float]:
    """Variance, skewness and kurtosis from the first four raw moments."""
    m1, m2, m3, m4 = raw
    variance = m2 - m1 ** 2
    if variance <= 0:
        raise NumericalError("non-positive variance from raw moments", {"raw": list(raw)})
    mu3 = m3 - 3 * m1 * m2 + 2 * m1 ** 3
    mu4 = m4 - 4 * m1 * m3 + 6 * m1 ** 2 * m2 - 3 * m1 ** 4
    return (variance, mu3 / variance ** 1.5, mu4 / variance ** 2)


def exg_summary(params: ParamsLike) -> MomentSummary:
    raw = exg_moments(params)
    variance, skewness, kurtosis = exg_shape(params)
    return MomentSummary(
        raw_moments=raw,
        mean=raw[0],
        variance=variance,
        sd=math.sqrt(variance),
        skewness=skewness,
        kurtosis=kurtosis,
    )


# ----------------------------------------------------------------------
# Truncated variants
# ----------------------------------------------------------------------


def log_window_mass(lo: float, hi: float, mu, sigma, tau) -> np.ndarray:
    """log(F(hi) - F(lo)), computed from whichever tail keeps precision."""
    log_hi = log_cdf(hi, mu, sigma, tau)
    log_lo = log_cdf(lo, mu, sigma, tau)
    with np.errstate(divide="ignore"):
        from_cdf = log_hi + np.log1p(-np.exp(np.minimum(log_lo - log_hi, 0.0)))
        sf_lo = log_sf(lo, mu, sigma, tau)
        sf_hi = log_sf(hi, mu, sigma, tau)
        from_sf = sf_lo + np.log1p(-np.exp(np.minimum(sf_hi - sf_lo, 0.0)))
    return np.where(log_lo > np.log(0.5), from_sf, from_cdf)


def exg_truncated_logpdf(params: ParamsLike, t: ArrayLike, window: Tuple[float, float]):
    """Log-density renormalized to `window`; -inf outside it."""
    p = as_params(params)
    lo, hi = window
    arr, scalar = _prepare(t)
    out = log_density(arr, p.mu, p.sigma, p.tau) - log_window_mass(lo, hi, p.mu, p.sigma, p.tau)
    out = np.where((arr >= lo) & (arr <= hi), out, -np.inf)
    return _finish(out, scalar)


def exg_truncated_sf(params: ParamsLike, t: ArrayLike, window: Tuple[float, float]):
    p = as_params(params)
    lo, hi = window
    arr, scalar = _prepare(t)
    inside = np.clip(arr, lo, hi)
    log_mass = log_window_mass(lo, hi, p.mu, p.sigma, p.tau)
    log_tail = log_window_mass(inside, hi, p.mu, p.sigma, p.tau)
    out = np.clip(np.exp(log_tail - log_mass), 0.0, 1.0)
    return _finish(out, scalar)


def exg_params(mu: float, sigma: float, tau: float, prior: Optional[Tuple[float, float]] = None) -> ExGaussianParams:
    """Build parameters, optionally requiring each entry to lie in the prior box."""
    params = as_params((mu, sigma, tau))
    if prior is not None and not params.in_prior_support(*prior):
        raise ParameterDomainError(f"parameters {params.as_tuple()} outside prior support {prior}")
    return params
