"""
tsbpa.py

Stage-2 pooling of per-subject SSRT triples.

Subject triples y_i = (mu_i, sigma_i, tau_i) follow a trivariate normal
written as a chain of conditional regressions:

    mu_i                ~ N(mu_mu, sd_mu^2)
    sigma_i | mu_i      ~ N(beta20 + beta21 mu_i, sd_sigma^2)
    tau_i | mu_i, sigma ~ N(beta30 + beta31 mu_i + beta32 sigma_i, sd_tau^2)

Locations get N(0, location_prior_sd^2) priors, scales half-normal priors
truncated to [SCALE_FLOOR, scale_upper]. The location blocks are drawn
exactly from their Gaussian full conditionals on a centered design; the
scales are updated by random-walk Metropolis on the log scale.
"""

import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import linalg
from tqdm import tqdm

from logging_config import get_logger, log_chain_summary

from .errors import ParameterDomainError, PreconditionError
from .mcmc import convergence_warnings, gelman_rubin, rhat_dict, summarize_draws
from .mixture import make_mixture
from .types import (
    STAGE2_PARAMS,
    Cluster,
    ClusterFits,
    ExGaussianParams,
    OverallDistributions,
    Stage2Config,
    Stage2Posterior,
    SubjectTriples,
)
from .utils import make_rng, parallel_map, spawn_seeds

logger = get_logger(__name__)

SCALE_FLOOR = 0.01
MIN_SUBJECTS = 3

_MU, _B20, _B21, _B30, _B31, _B32, _SD_MU, _SD_SIGMA, _SD_TAU = range(9)


class _Regression(NamedTuple):
    """Gaussian linear model on a centered design; beta = to_beta @ gamma."""

    y: np.ndarray
    design: np.ndarray
    gram: np.ndarray
    xty: np.ndarray
    prior_precision: np.ndarray
    to_beta: np.ndarray


def _regression(y: np.ndarray, covariates: Sequence[np.ndarray], prior_sd: float) -> _Regression:
    means = np.array([c.mean() for c in covariates])
    design = np.column_stack([np.ones_like(y)] + [c - m for c, m in zip(covariates, means)])
    k = design.shape[1]
    to_beta = np.eye(k)
    to_beta[0, 1:] = -means
    prior_precision = to_beta.T @ to_beta / prior_sd ** 2
    return _Regression(y, design, design.T @ design, design.T @ y, prior_precision, to_beta)


def _draw_gamma(reg: _Regression, variance: float, rng: np.random.Generator) -> np.ndarray:
    precision = reg.gram / variance + reg.prior_precision
    upper = linalg.cholesky(precision)
    tmp = linalg.solve_triangular(upper, reg.xty / variance, trans="T") + rng.standard_normal(reg.gram.shape[0])
    return linalg.solve_triangular(upper, tmp, trans="N")


def _log_scale_posterior(s: float, n: int, ss: float, prior_sd: float) -> float:
    # includes the log-scale random-walk Jacobian
    return -n * math.log(s) - ss / (2.0 * s * s) - s * s / (2.0 * prior_sd ** 2) + math.log(s)


def _draw_scale(s, n, ss, log_step, prior_sd, upper, rng):
    proposal = s * math.exp(log_step * rng.standard_normal())
    if proposal < SCALE_FLOOR or proposal > upper:
        return s, False
    log_ratio = _log_scale_posterior(proposal, n, ss, prior_sd) - _log_scale_posterior(s, n, ss, prior_sd)
    if math.log(rng.random()) < log_ratio:
        return proposal, True
    return s, False


def overall_triple(draws: np.ndarray) -> np.ndarray:
    """Population mean vector (mu, sigma, tau) implied by stage-2 draws of shape (..., 9)."""
    draws = np.asarray(draws, dtype=float)
    mu = draws[..., _MU]
    sigma = draws[..., _B20] + draws[..., _B21] * mu
    tau = draws[..., _B30] + draws[..., _B31] * mu + draws[..., _B32] * sigma
    return np.stack([mu, sigma, tau], axis=-1)


def implied_covariance(draws: np.ndarray) -> np.ndarray:
    """
    Covariance M D^2 M' of (mu, sigma, tau), M = (I - B)^-1, for draws of shape (..., 9).

    B is strictly lower triangular, so M is unit lower triangular with
    M[2, 0] = beta31 + beta32 * beta21.
    """
    draws = np.asarray(draws, dtype=float)
    b21, b31, b32 = draws[..., _B21], draws[..., _B31], draws[..., _B32]
    m = np.zeros(draws.shape[:-1] + (3, 3))
    m[..., 0, 0] = m[..., 1, 1] = m[..., 2, 2] = 1.0
    m[..., 1, 0] = b21
    m[..., 2, 0] = b31 + b32 * b21
    m[..., 2, 1] = b32
    d2 = draws[..., _SD_MU:_SD_TAU + 1] ** 2
    return np.einsum("...ij,...j,...kj->...ik", m, d2, m)


def implied_correlations(draws: np.ndarray) -> Dict[str, float]:
    """Posterior mean of the three implied correlations."""
    cov = implied_covariance(draws)
    sd = np.sqrt(np.diagonal(cov, axis1=-2, axis2=-1))
    corr = cov / (sd[..., :, None] * sd[..., None, :])
    return {
        "mu_sigma": float(np.mean(corr[..., 0, 1])),
        "mu_tau": float(np.mean(corr[..., 0, 2])),
        "sigma_tau": float(np.mean(corr[..., 1, 2])),
    }


def _degeneracy_warnings(y: np.ndarray, cluster: str) -> List[str]:
    warnings = []
    spread = y.std(axis=0)
    centered = y - y.mean(axis=0)
    if np.any(spread < SCALE_FLOOR) or np.linalg.matrix_rank(centered, tol=SCALE_FLOOR) < 3:
        warnings.append(
            f"type-{cluster} stage 2: degenerate subject triples (rank-deficient spread); "
            f"slopes held at zero and scales pinned near {SCALE_FLOOR}"
        )
    return warnings


def _run_chain(y: np.ndarray, config: Stage2Config, seed, label: str) -> np.ndarray:
    rng = make_rng(seed)
    n = y.shape[0]
    mu_i, sigma_i, tau_i = y[:, 0], y[:, 1], y[:, 2]
    loc_sd = config.location_prior_sd

    reg_mu = _regression(mu_i, [], loc_sd)
    if config.fix_slopes_zero:
        reg_sigma = _regression(sigma_i, [], loc_sd)
        reg_tau = _regression(tau_i, [], loc_sd)
    else:
        reg_sigma = _regression(sigma_i, [mu_i], loc_sd)
        reg_tau = _regression(tau_i, [mu_i, sigma_i], loc_sd)
    regs = (reg_mu, reg_sigma, reg_tau)

    # overdispersed start around the sample spread
    scales = np.clip(y.std(axis=0, ddof=1) * rng.uniform(0.5, 2.0, size=3), SCALE_FLOOR * 2, config.scale_upper / 2)
    log_steps = np.full(3, 1.0 / math.sqrt(2.0 * n))
    batch_accepts = np.zeros(3)
    batch = 0
    adapt_interval = 50

    draws = np.empty((config.n_iter, len(STAGE2_PARAMS)))
    for it in tqdm(range(config.n_iter), desc=label, disable=not config.progress, leave=False):
        betas = []
        for j, reg in enumerate(regs):
            gamma = _draw_gamma(reg, scales[j] ** 2, rng)
            resid = reg.y - reg.design @ gamma
            scales[j], accepted = _draw_scale(
                scales[j], n, float(resid @ resid), log_steps[j],
                config.scale_prior_sd, config.scale_upper, rng,
            )
            batch_accepts[j] += accepted
            betas.append(reg.to_beta @ gamma)

        b_mu, b_sigma, b_tau = betas
        row = draws[it]
        row[_MU] = b_mu[0]
        row[_B20] = b_sigma[0]
        row[_B21] = 0.0 if config.fix_slopes_zero else b_sigma[1]
        row[_B30] = b_tau[0]
        row[_B31], row[_B32] = (0.0, 0.0) if config.fix_slopes_zero else (b_tau[1], b_tau[2])
        row[_SD_MU:] = scales

        if it < config.n_burn and (it + 1) % adapt_interval == 0:
            batch += 1
            rate = batch_accepts / adapt_interval
            log_steps *= np.exp(np.where(rate > 0.44, 1.0, -1.0) * min(1.0, 1.0 / math.sqrt(batch)))
            batch_accepts[:] = 0
    return draws


def fit_stage2(data: SubjectTriples, config: Optional[Stage2Config] = None) -> Stage2Posterior:
    """
    Pool subject SSRT triples into an overall (mu, sigma, tau) per cluster.

    The overall triple is the posterior mean of the population mean vector,
    evaluated per draw as (mu_mu, beta20 + beta21 mu_mu,
    beta30 + beta31 mu_mu + beta32 sigma_bar).

    Raises:
        PreconditionError: fewer than three subjects.
    """
    config = config or Stage2Config()
    y = data.as_array()
    if y.shape[0] < MIN_SUBJECTS:
        raise PreconditionError(f"stage 2 needs at least {MIN_SUBJECTS} subjects, got {y.shape[0]}")

    label = f"stage2-{data.cluster}"
    warnings = _degeneracy_warnings(y, data.cluster)
    for w in warnings:
        logger.warning(w)
    if warnings:
        config = config.model_copy(update={"fix_slopes_zero": True})
    logger.info(f"Stage 2 {data.cluster}: {y.shape[0]} subjects, {config.n_chains}x{config.n_iter}")

    seeds = spawn_seeds(config.seed, config.n_chains)
    chains = parallel_map(
        lambda c: _run_chain(y, config, seeds[c], f"{label}[{c}]"), range(config.n_chains), config.threads
    )
    kept = np.stack([c[config.n_burn:] for c in chains])
    pooled = kept.reshape(-1, kept.shape[2])

    rhat = gelman_rubin(kept)
    moved = [np.mean(np.diff(c[config.n_burn:], axis=0) != 0, axis=0) for c in chains]
    if config.fix_slopes_zero:
        for rates in moved:
            rates[[_B21, _B31, _B32]] = 1.0
    warnings += convergence_warnings(label, STAGE2_PARAMS, rhat, moved)

    triples = overall_triple(pooled)
    mean_corr = implied_correlations(pooled)

    log_chain_summary(label, [float(np.mean(m[_SD_MU:])) for m in moved], rhat.tolist())
    return Stage2Posterior(
        cluster=data.cluster,
        draws=kept,
        overall_triple=tuple(float(v) for v in triples.mean(axis=0)),
        implied_correlations=mean_corr,
        rhat=rhat_dict(STAGE2_PARAMS, rhat),
        summary=summarize_draws(pooled, STAGE2_PARAMS),
        n_subjects=y.shape[0],
        warnings=warnings,
    )


def _as_overall(value: Union[Stage2Posterior, ExGaussianParams]) -> ExGaussianParams:
    return value.overall() if isinstance(value, Stage2Posterior) else value


def overall_distributions(
    stage2_s: Union[Stage2Posterior, ExGaussianParams],
    stage2_a: Union[Stage2Posterior, ExGaussianParams],
    stage2_b: Union[Stage2Posterior, ExGaussianParams],
    w_bar: float,
) -> OverallDistributions:
    """Single = ExG(theta_S); mixture = (w_bar, theta_A, theta_B)."""
    if not 0.0 <= w_bar <= 1.0:
        raise ParameterDomainError(f"w_bar must lie in [0, 1], got {w_bar}")
    return OverallDistributions(
        single=_as_overall(stage2_s),
        mixture=make_mixture(w_bar, _as_overall(stage2_a), _as_overall(stage2_b)),
    )


def triples_from_cluster_fits(
    fits: Sequence[ClusterFits], cluster: Cluster, subjects: Optional[Sequence[str]] = None
) -> SubjectTriples:
    """Stage-1 posterior-mean SSRT triples of one cluster type across a cohort."""
    rows = [f.theta_stop(cluster).as_tuple() for f in fits]
    return SubjectTriples(rows=rows, cluster=cluster, subjects=list(subjects) if subjects else None)


def cohort_mean_weight(fits: Sequence[ClusterFits]) -> float:
    if not fits:
        raise PreconditionError("empty cohort")
    return float(np.mean([f.w_a for f in fits]))
