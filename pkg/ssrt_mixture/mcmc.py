"""
mcmc.py

Component-wise adaptive random-walk Metropolis and convergence diagnostics
shared by the individual and the two-stage fits.

Each coordinate keeps its own log step size. During burn-in the step is
nudged after every `adapt_interval` iterations towards the target acceptance
rate (0.44 for one-dimensional updates); after burn-in it is frozen so the
kept draws come from a fixed Markov kernel.
"""

from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from tqdm import tqdm

from logging_config import get_logger

from .types import ParameterSummary, PosteriorSummary

logger = get_logger(__name__)

RHAT_THRESHOLD = 1.1


class ComponentTarget:
    """
    Log target evaluated one coordinate update at a time.

    `start` evaluates the full log density and primes any cache; `propose`
    evaluates it at a point differing from the current one in coordinate j;
    `commit` is called when that proposal is accepted. Subclasses cache parts
    of the density that do not depend on j.
    """

    def __init__(self, log_density: Optional[Callable[[np.ndarray], float]] = None):
        self._log_density = log_density

    def start(self, x: np.ndarray) -> float:
        return self._log_density(x)

    def propose(self, x: np.ndarray, j: int) -> float:
        return self._log_density(x)

    def commit(self) -> None:
        pass


class ChainRun(NamedTuple):
    draws: np.ndarray
    """(n_iter, n_params); burn-in included."""
    acceptance: np.ndarray
    """Post-burn-in acceptance rate per coordinate."""
    log_scales: np.ndarray


def adaptive_metropolis(
    target: ComponentTarget,
    x0: Sequence[float],
    n_iter: int,
    n_burn: int,
    rng: np.random.Generator,
    lower: Sequence[float],
    upper: Sequence[float],
    initial_scale: Sequence[float],
    target_acceptance: float = 0.44,
    adapt_interval: int = 50,
    progress: bool = False,
    label: str = "chain",
) -> ChainRun:
    """
    Run one chain on the box [lower, upper].

    Proposals leaving the box are rejected without evaluating the target.
    """
    x = np.array(x0, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    n_params = x.size
    log_scale = np.log(np.asarray(initial_scale, dtype=float))

    current = target.start(x)
    if not np.isfinite(current):
        raise ValueError(f"{label}: log target is not finite at the initial point {x}")

    draws = np.empty((n_iter, n_params), dtype=float)
    batch_accepts = np.zeros(n_params)
    kept_accepts = np.zeros(n_params)
    batch = 0

    for it in tqdm(range(n_iter), desc=label, disable=not progress, leave=False):
        steps = rng.standard_normal(n_params) * np.exp(log_scale)
        uniforms = np.log(rng.random(n_params))
        for j in range(n_params):
            old = x[j]
            new = old + steps[j]
            if new < lower[j] or new > upper[j]:
                continue
            x[j] = new
            proposed = target.propose(x, j)
            if uniforms[j] < proposed - current:
                current = proposed
                target.commit()
                batch_accepts[j] += 1
                if it >= n_burn:
                    kept_accepts[j] += 1
            else:
                x[j] = old
        draws[it] = x

        if it < n_burn and (it + 1) % adapt_interval == 0:
            batch += 1
            rate = batch_accepts / adapt_interval
            delta = min(1.0, 1.0 / np.sqrt(batch))
            log_scale += np.where(rate > target_acceptance, delta, -delta)
            batch_accepts[:] = 0
            logger.debug(f"{label}: batch {batch} acceptance {np.round(rate, 2).tolist()}")

    n_kept = n_iter - n_burn
    return ChainRun(draws=draws, acceptance=kept_accepts / max(n_kept, 1), log_scales=log_scale)


def gelman_rubin(draws: np.ndarray) -> np.ndarray:
    """
    Split-chain potential scale reduction factor per parameter.

    `draws` has shape (n_chains, n_samples, n_params) and holds post-burn-in
    draws only. Each chain is cut in two halves before the between/within
    variance comparison. Parameters that never move in any chain get 1.0.
    """
    draws = np.asarray(draws, dtype=float)
    n_chains, n_samples, n_params = draws.shape
    half = n_samples // 2
    if half < 2:
        return np.full(n_params, np.nan)
    pieces = np.concatenate([draws[:, :half, :], draws[:, half:2 * half, :]], axis=0)

    n = half
    piece_means = pieces.mean(axis=1)
    between = n * piece_means.var(axis=0, ddof=1)
    within = pieces.var(axis=1, ddof=1).mean(axis=0)
    pooled = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(pooled / within)
    rhat = np.where(within > 0, rhat, np.where(between > 0, np.inf, 1.0))
    return rhat


def summarize_draws(pooled: np.ndarray, names: Sequence[str]) -> PosteriorSummary:
    """Posterior mean, sd and central 95% interval of every column."""
    pooled = np.asarray(pooled, dtype=float)
    lo, hi = np.percentile(pooled, [2.5, 97.5], axis=0)
    means = pooled.mean(axis=0)
    sds = pooled.std(axis=0, ddof=1) if pooled.shape[0] > 1 else np.zeros(pooled.shape[1])
    return PosteriorSummary(parameters={
        name: ParameterSummary(mean=float(means[i]), sd=float(sds[i]), lo95=float(lo[i]), hi95=float(hi[i]))
        for i, name in enumerate(names)
    })


def convergence_warnings(
    label: str,
    names: Sequence[str],
    rhat: np.ndarray,
    acceptance: List[np.ndarray],
    threshold: float = RHAT_THRESHOLD,
) -> List[str]:
    """Warnings for R-hat above threshold and for coordinates that never moved."""
    warnings = []
    for name, value in zip(names, rhat):
        if np.isfinite(value) and value > threshold:
            warnings.append(f"{label}: R-hat for {name} is {value:.3f} > {threshold}")
        elif not np.isfinite(value) and not np.isnan(value):
            warnings.append(f"{label}: R-hat for {name} is infinite")
    for c, rates in enumerate(acceptance):
        for name, rate in zip(names, rates):
            if rate == 0:
                warnings.append(f"{label}: chain {c} rejected every {name} proposal after burn-in")
    for w in warnings:
        logger.warning(w)
    return warnings


def rhat_dict(names: Sequence[str], rhat: np.ndarray) -> Dict[str, float]:
    return {name: float(v) for name, v in zip(names, rhat)}
