"""
bayesfit.py

Censored race-model likelihood and the individual Bayesian fit of
(theta_go, theta_stop) under uniform priors.

Go trials contribute log f_go(t). A failed stop trial with response t_r at
delay d contributes log f_go(t_r) + log(1 - F_stop(t_r - d)). A successful
inhibition at delay d contributes log P(GO >= d + SSRT).

The inhibition probability is computed exactly by default: GO - SSRT - d is a
Normal(m, s^2) plus the difference of two exponentials, which is tau_go-
exponential with probability tau_go/(tau_go+tau_stop) and negated
tau_stop-exponential otherwise, so

    P = p_go * ExG_sf(0 | m, s, tau_go) + p_stop * ExG_cdf(0 | -m, s, tau_stop)

with m = mu_go - mu_stop - d and s = sqrt(sigma_go^2 + sigma_stop^2). The
adaptive Gauss-Kronrod route integrates f_stop(u) * (1 - F_go(u + d)) over
the stop-time axis instead, and is the only route once densities are
truncated to a window.
"""

from typing import Literal, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate

from logging_config import get_logger, log_chain_summary

from .errors import NumericalError, PreconditionError
from .exgauss import as_params, log_cdf, log_density, log_sf, log_window_mass
from .mcmc import (
    ComponentTarget,
    adaptive_metropolis,
    convergence_warnings,
    gelman_rubin,
    rhat_dict,
    summarize_draws,
)
from .racesim import extract_views, partition_clusters
from .types import (
    RACE_PARAMS,
    ClusterFits,
    ClusterPartition,
    ExGaussianParams,
    IbpaConfig,
    IbpaResult,
    PosteriorChains,
    RaceLikelihoodInput,
    SstDataset,
)
from .utils import SeedLike, parallel_map, spawn_rngs, spawn_seeds

logger = get_logger(__name__)

# per-term floor on log-likelihood contributions
LOG_FLOOR = -1.0e8

QUAD_EPSREL = 1e-8

Triple = Tuple[float, float, float]
Window = Optional[Tuple[float, float]]
IntegralMethod = Literal["closed-form", "quadrature"]


class PreparedRace(NamedTuple):
    go_rts: np.ndarray
    respond_rt: np.ndarray
    respond_ssd: np.ndarray
    inhibit_ssd: np.ndarray
    """Unique inhibit SSDs."""
    inhibit_count: np.ndarray


def prepare_race(data: RaceLikelihoodInput) -> PreparedRace:
    respond = np.asarray(data.signal_respond, dtype=float).reshape(-1, 2)
    ssd, count = np.unique(np.asarray(data.signal_inhibit, dtype=float), return_counts=True)
    return PreparedRace(
        go_rts=np.asarray(data.go_rts, dtype=float),
        respond_rt=respond[:, 0],
        respond_ssd=respond[:, 1],
        inhibit_ssd=ssd,
        inhibit_count=count.astype(float),
    )


def race_input_from_view(view: SstDataset) -> RaceLikelihoodInput:
    """Likelihood input of a session or cluster view."""
    respond = [(t.rt_ms, t.ssd_ms) for t in view.trials if t.kind == "stop" and not t.inhibited]
    inhibit = [t.ssd_ms for t in view.trials if t.kind == "stop" and t.inhibited]
    return RaceLikelihoodInput(go_rts=view.go_rts().tolist(), signal_respond=respond, signal_inhibit=inhibit)


# ----------------------------------------------------------------------
# Density terms on raw triples
# ----------------------------------------------------------------------


def _log_go_density(t: np.ndarray, go: Triple, window: Window) -> np.ndarray:
    out = log_density(t, *go)
    if window is not None:
        lo, hi = window
        out = np.where((t >= lo) & (t <= hi), out - log_window_mass(lo, hi, *go), -np.inf)
    return out


def _log_stop_survival(u: np.ndarray, stop: Triple, window: Window) -> np.ndarray:
    if window is None:
        return log_sf(u, *stop)
    lo, hi = window
    with np.errstate(divide="ignore"):
        return log_window_mass(np.clip(u, lo, hi), hi, *stop) - log_window_mass(lo, hi, *stop)


def _log_inhibit_closed_form(go: Triple, stop: Triple, ssd: np.ndarray) -> np.ndarray:
    mu_g, sigma_g, tau_g = go
    mu_s, sigma_s, tau_s = stop
    m = mu_g - mu_s - ssd
    s = np.hypot(sigma_g, sigma_s)
    log_pg = np.log(tau_g / (tau_g + tau_s))
    log_ps = np.log(tau_s / (tau_g + tau_s))
    out = np.logaddexp(log_pg + log_sf(0.0, m, s, tau_g), log_ps + log_cdf(0.0, -m, s, tau_s))
    return np.minimum(out, 0.0)


def _inhibit_quadrature(go: Triple, stop: Triple, ssd: np.ndarray, window: Window) -> np.ndarray:
    mu_s, sigma_s, tau_s = stop
    a = mu_s - 10.0 * sigma_s
    b = mu_s + 10.0 * sigma_s + 40.0 * tau_s
    if window is not None:
        a, b = max(a, window[0]), min(b, window[1])
        if a >= b:
            return np.zeros_like(ssd)
        log_mass_stop = log_window_mass(window[0], window[1], *stop)
        log_mass_go = log_window_mass(window[0], window[1], *go)

    def integrand(u: float) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            if window is None:
                log_val = log_density(u, *stop) + log_sf(u + ssd, *go)
            else:
                t = np.clip(u + ssd, window[0], window[1])
                log_val = (
                    log_density(u, *stop) - log_mass_stop
                    + log_window_mass(t, window[1], *go) - log_mass_go
                )
        return np.exp(log_val)

    breaks = sorted({float(p) for p in np.append(go[0] - ssd, mu_s) if a < p < b})
    result, error, info = integrate.quad_vec(
        integrand, a, b, epsrel=QUAD_EPSREL, norm="max", points=breaks or None, full_output=True
    )
    if not info.success:
        raise NumericalError(
            f"inhibit integral did not converge (status {info.status})",
            {"go": go, "stop": stop, "ssd": ssd.tolist(), "error": float(np.max(error)),
             "neval": int(info.neval), "status": int(info.status)},
        )
    logger.debug(f"Inhibit quadrature: {info.neval} evaluations, max error {np.max(error):.2e}")
    return np.clip(result, 0.0, 1.0)


def _log_inhibit(go: Triple, stop: Triple, ssd: np.ndarray, method: IntegralMethod, window: Window) -> np.ndarray:
    if window is None and method == "closed-form":
        return _log_inhibit_closed_form(go, stop, ssd)
    with np.errstate(divide="ignore"):
        return np.log(_inhibit_quadrature(go, stop, ssd, window))


def _loglik_go(go: Triple, go_rts: np.ndarray, window: Window) -> float:
    if go_rts.size == 0:
        return 0.0
    return float(np.maximum(_log_go_density(go_rts, go, window), LOG_FLOOR).sum())


def _loglik_stop(go: Triple, stop: Triple, prep: PreparedRace, method: IntegralMethod, window: Window) -> float:
    total = 0.0
    if prep.respond_rt.size:
        terms = _log_go_density(prep.respond_rt, go, window) + _log_stop_survival(
            prep.respond_rt - prep.respond_ssd, stop, window
        )
        total += float(np.maximum(terms, LOG_FLOOR).sum())
    if prep.inhibit_ssd.size:
        terms = _log_inhibit(go, stop, prep.inhibit_ssd, method, window)
        total += float((np.maximum(terms, LOG_FLOOR) * prep.inhibit_count).sum())
    return total


# ----------------------------------------------------------------------
# Public likelihood API
# ----------------------------------------------------------------------


def loglik_go(theta_go: ExGaussianParams, go_rts: Sequence[float], truncate: Window = None) -> float:
    """Sum of go log-densities, each floored at LOG_FLOOR."""
    return _loglik_go(as_params(theta_go).as_tuple(), np.asarray(go_rts, dtype=float), truncate)


def loglik_stop(
    theta_go: ExGaussianParams,
    theta_stop: ExGaussianParams,
    data: RaceLikelihoodInput,
    method: IntegralMethod = "closed-form",
    truncate: Window = None,
) -> float:
    """Signal-respond plus signal-inhibit log-likelihood; 0 without stop trials."""
    go, stop = as_params(theta_go).as_tuple(), as_params(theta_stop).as_tuple()
    return _loglik_stop(go, stop, prepare_race(data), method, truncate)


def inhibit_probability(
    theta_go: ExGaussianParams,
    theta_stop: ExGaussianParams,
    ssd: Union[float, Sequence[float]],
    method: IntegralMethod = "closed-form",
    truncate: Window = None,
):
    """P(GO >= ssd + SSRT) for one or many delays."""
    go, stop = as_params(theta_go).as_tuple(), as_params(theta_stop).as_tuple()
    arr = np.asarray(ssd, dtype=float)
    out = np.exp(_log_inhibit(go, stop, np.atleast_1d(arr), method, truncate))
    return float(out[0]) if arr.ndim == 0 else out


def posterior_predictive_inhibition(
    theta_go: ExGaussianParams, theta_stop: ExGaussianParams, ssds: Sequence[float]
) -> float:
    """Plug-in inhibition rate averaged over the observed delays."""
    ssds = np.asarray(ssds, dtype=float)
    if ssds.size == 0:
        raise PreconditionError("no stop-signal delays given")
    return float(np.mean(inhibit_probability(theta_go, theta_stop, ssds)))


# ----------------------------------------------------------------------
# IBPA sampler
# ----------------------------------------------------------------------


class RaceTarget(ComponentTarget):
    """Race log-likelihood over (mu_go, sigma_go, tau_go, mu_stop, sigma_stop, tau_stop).

    Updates of a stop coordinate reuse the cached go-trial term.
    """

    def __init__(self, prep: PreparedRace, method: IntegralMethod, window: Window):
        super().__init__()
        self.prep = prep
        self.method = method
        self.window = window
        self._parts = (0.0, 0.0)
        self._pending = (0.0, 0.0)

    def _go_part(self, x: np.ndarray) -> float:
        return _loglik_go(tuple(x[:3]), self.prep.go_rts, self.window)

    def _stop_part(self, x: np.ndarray) -> float:
        return _loglik_stop(tuple(x[:3]), tuple(x[3:]), self.prep, self.method, self.window)

    def start(self, x: np.ndarray) -> float:
        self._parts = (self._go_part(x), self._stop_part(x))
        return sum(self._parts)

    def propose(self, x: np.ndarray, j: int) -> float:
        go_part = self._parts[0] if j >= 3 else self._go_part(x)
        self._pending = (go_part, self._stop_part(x))
        return sum(self._pending)

    def commit(self) -> None:
        self._parts = self._pending


def fit_ibpa(
    data: Union[SstDataset, RaceLikelihoodInput],
    config: Optional[IbpaConfig] = None,
    seed: SeedLike = None,
    label: str = "ibpa",
) -> IbpaResult:
    """
    Fit (theta_go, theta_stop) to one session or cluster view.

    Args:
        data: a session view or a prepared likelihood input.
        config: sampler settings; `config.seed` is used unless `seed` is given.
        seed: int or SeedSequence overriding `config.seed`.
        label: name used in logs and warnings.

    Raises:
        PreconditionError: the data hold no go or no stop trial.
    """
    config = config or IbpaConfig()
    race = race_input_from_view(data) if isinstance(data, SstDataset) else data
    if config.use_likelihood:
        if not race.go_rts:
            raise PreconditionError(f"{label}: no go trials")
        if race.n_stop == 0:
            raise PreconditionError(f"{label}: no stop trials")

    prep = prepare_race(race)
    method = "quadrature" if config.truncate is not None else config.integral
    lo, hi = config.prior_lo, config.prior_hi
    n_params = len(RACE_PARAMS)
    rngs = spawn_rngs(config.seed if seed is None else seed, config.n_chains)

    logger.info(
        f"IBPA {label}: {len(race.go_rts)} go, {len(race.signal_respond)} respond, "
        f"{len(race.signal_inhibit)} inhibit; {config.n_chains}x{config.n_iter} ({method})"
    )

    def run_chain(c: int):
        rng = rngs[c]
        x0 = rng.uniform(lo, hi, size=n_params)
        target = RaceTarget(prep, method, config.truncate) if config.use_likelihood else ComponentTarget(lambda x: 0.0)
        return adaptive_metropolis(
            target, x0, config.n_iter, config.n_burn, rng,
            lower=np.full(n_params, lo), upper=np.full(n_params, hi),
            initial_scale=np.full(n_params, (hi - lo) / 20.0),
            target_acceptance=config.target_acceptance,
            adapt_interval=config.adapt_interval,
            progress=config.progress,
            label=f"{label}[{c}]",
        )

    runs = parallel_map(run_chain, range(config.n_chains), config.threads)
    draws = np.stack([r.draws for r in runs])
    kept = draws[:, config.n_burn:, :]
    rhat = gelman_rubin(kept)
    acceptance = [r.acceptance for r in runs]
    warnings = convergence_warnings(label, RACE_PARAMS, rhat, acceptance)

    chains = PosteriorChains(
        draws=draws,
        param_names=list(RACE_PARAMS),
        n_burn=config.n_burn,
        n_iter=config.n_iter,
        acceptance_rates=[a.tolist() for a in acceptance],
        rhat=rhat_dict(RACE_PARAMS, rhat),
    )
    summary = summarize_draws(chains.pooled(), RACE_PARAMS)
    log_chain_summary(label, [float(np.mean(a)) for a in acceptance], rhat.tolist())
    return IbpaResult(chains=chains, summary=summary, warnings=warnings)


def fit_all_clusters(
    d: SstDataset,
    p: Optional[ClusterPartition] = None,
    config: Optional[IbpaConfig] = None,
) -> ClusterFits:
    """
    IBPA on the type-S, type-A and type-B views of one session.

    Raises:
        PreconditionError: the type-A or type-B view has fewer than 2 stop trials.
    """
    config = config or IbpaConfig()
    p = p or partition_clusters(d)
    views = extract_views(d, p)
    for cluster, stops in (("A", p.stop_a), ("B", p.stop_b)):
        if len(stops) < 2:
            raise PreconditionError(f"type-{cluster} view has {len(stops)} stop trials; at least 2 required")

    seeds = spawn_seeds(config.seed, 3)
    fits = {}
    for cluster, child in zip(("S", "A", "B"), seeds):
        fits[cluster] = fit_ibpa(views.by_cluster(cluster), config, seed=child, label=f"type-{cluster}")
    return ClusterFits(fits=fits, w_a=p.w_a)
