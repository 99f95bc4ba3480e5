"""
racesim.py

Stop-signal task simulation under the independent horse race model, and the
type-A / type-B partition of a session by the kind of the preceding trial.

On every stop trial a go latency and a stop latency are drawn independently;
the response is executed iff go < SSD + SSRT. The SSD then moves up by one
step after a successful inhibition and down by one step after a failure,
clamped at `min_ssd_ms`.
"""

import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from logging_config import get_logger

from .errors import DesignError, PreconditionError
from .exgauss import as_params, exg_sample
from .types import (
    ClusterPartition,
    ClusterViews,
    DesignConfig,
    ExGaussianParams,
    SessionMeta,
    SstDataset,
    Trial,
)
from .utils import SeedLike, make_rng, parallel_map, spawn_seeds

logger = get_logger(__name__)

# type-B stop trials required per subject in the empirical cohort
MIN_TYPE_B_STOPS = 10

_MAX_REDRAW_ROUNDS = 100


def _positive_sample(params: ExGaussianParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Ex-Gaussian draws with non-positive values redrawn."""
    out = exg_sample(params, n, rng)
    for _ in range(_MAX_REDRAW_ROUNDS):
        bad = out <= 0
        if not bad.any():
            return out
        out[bad] = exg_sample(params, int(bad.sum()), rng)
    raise DesignError(f"go process {params.as_tuple()} keeps producing non-positive latencies")


def place_stop_trials(design: DesignConfig, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask of stop-trial positions."""
    n = design.n_trials
    if design.placement == "bernoulli":
        return rng.random(n) < design.stop_fraction

    is_stop = np.zeros(n, dtype=bool)
    for start in range(0, n, design.block_size):
        size = min(design.block_size, n - start)
        k = min(size, math.ceil(design.stop_fraction * size))
        is_stop[start + rng.choice(size, size=k, replace=False)] = True
    return is_stop


def simulate_sst(
    go: ExGaussianParams,
    stop: ExGaussianParams,
    design: Optional[DesignConfig] = None,
    seed: SeedLike = None,
    stop_b: Optional[ExGaussianParams] = None,
    retain_latent: bool = False,
) -> SstDataset:
    """
    Simulate one tracked stop-signal task session.

    Args:
        go: go-process latency distribution.
        stop: SSRT distribution (of every stop trial unless `stop_b` is given).
        design: task design; defaults to 96 trials, 25% stop, 250 ms start, 50 ms step.
        seed: int, SeedSequence or Generator.
        stop_b: SSRT distribution for stop trials preceded by a stop trial.
        retain_latent: keep the latent go and stop latencies on every trial.

    Raises:
        DesignError: stop_fraction outside (0, 1) or no stop trial placed.
    """
    design = design or DesignConfig()
    go, stop = as_params(go), as_params(stop)
    stop_b = as_params(stop_b) if stop_b is not None else stop
    if not 0.0 < design.stop_fraction < 1.0:
        raise DesignError(f"stop_fraction must lie in (0, 1), got {design.stop_fraction}")

    rng = make_rng(seed)
    is_stop = place_stop_trials(design, rng)
    n_stop = int(is_stop.sum())
    if n_stop == 0:
        raise DesignError("design placed no stop trials")

    go_latency = _positive_sample(go, design.n_trials, rng)
    ssrt_a = exg_sample(stop, n_stop, rng)
    ssrt_b = exg_sample(stop_b, n_stop, rng) if stop_b is not stop else ssrt_a

    trials: List[Trial] = []
    ssd = design.initial_ssd_ms
    k = 0
    for i in range(design.n_trials):
        g = float(go_latency[i])
        latent_go = g if retain_latent else None
        if not is_stop[i]:
            trials.append(Trial(index=i + 1, kind="go", rt_ms=g, latent_go_ms=latent_go))
            continue

        after_stop = i > 0 and is_stop[i - 1]
        ssrt = float(ssrt_b[k] if after_stop else ssrt_a[k])
        k += 1
        inhibited = not g < ssd + ssrt
        trials.append(Trial(
            index=i + 1,
            kind="stop",
            ssd_ms=ssd,
            rt_ms=None if inhibited else g,
            inhibited=inhibited,
            latent_go_ms=latent_go,
            latent_ssrt_ms=ssrt if retain_latent else None,
        ))
        if design.tracking:
            ssd = max(design.min_ssd_ms, ssd + design.step_ms if inhibited else ssd - design.step_ms)

    meta = SessionMeta(
        n_trials=design.n_trials,
        stop_fraction=design.stop_fraction,
        initial_ssd_ms=design.initial_ssd_ms,
        step_ms=design.step_ms,
        seed=seed if isinstance(seed, int) else None,
    )
    return SstDataset(trials=trials, meta=meta)


def simulate_cohort(
    go: Union[ExGaussianParams, Sequence[ExGaussianParams]],
    stop: Union[ExGaussianParams, Sequence[ExGaussianParams]],
    n_subjects: int,
    design: Optional[DesignConfig] = None,
    seed: Optional[int] = None,
    stop_b: Union[None, ExGaussianParams, Sequence[ExGaussianParams]] = None,
    threads: int = 1,
) -> List[SstDataset]:
    """
    Simulate independent sessions with per-subject child seeds.

    Each parameter argument is either one distribution shared by every subject
    or a sequence with one entry per subject.
    """
    if n_subjects < 1:
        raise DesignError(f"n_subjects must be >= 1, got {n_subjects}")

    def per_subject(value, name):
        if value is None or isinstance(value, ExGaussianParams):
            return [value] * n_subjects
        values = list(value)
        if len(values) != n_subjects:
            raise DesignError(f"{name} has {len(values)} entries for {n_subjects} subjects")
        return values

    gos, stops, stop_bs = per_subject(go, "go"), per_subject(stop, "stop"), per_subject(stop_b, "stop_b")
    seeds = spawn_seeds(seed, n_subjects)
    logger.info(f"Simulating {n_subjects} sessions (seed {seed})")
    return parallel_map(
        lambda i: simulate_sst(gos[i], stops[i], design, seeds[i], stop_b=stop_bs[i]),
        range(n_subjects),
        threads,
    )


def partition_clusters(d: SstDataset) -> ClusterPartition:
    """
    Split trials 2..N by the kind of the preceding trial.

    Trial 1 has no predecessor and belongs to neither cluster.
    """
    go_a: List[int] = []
    go_b: List[int] = []
    stop_a: List[int] = []
    stop_b: List[int] = []
    for prev, trial in zip(d.trials, d.trials[1:]):
        after_go = prev.kind == "go"
        if trial.kind == "go":
            (go_a if after_go else go_b).append(trial.index)
        else:
            (stop_a if after_go else stop_b).append(trial.index)

    n_stop = len(stop_a) + len(stop_b)
    if n_stop == 0:
        raise PreconditionError("no stop trials after the first trial; w_a is undefined")
    return ClusterPartition(
        go_a=go_a, go_b=go_b, stop_a=stop_a, stop_b=stop_b, w_a=len(stop_a) / n_stop
    )


def _subset(d: SstDataset, indices: Sequence[int]) -> SstDataset:
    keep = set(indices)
    trials = [t for t in d.trials if t.index in keep]
    meta = d.meta.model_copy(update={"n_trials": len(trials)})
    return SstDataset(trials=trials, meta=meta)


def extract_views(d: SstDataset, p: Optional[ClusterPartition] = None) -> ClusterViews:
    """Type-S (all trials), type-A and type-B views; order and SSDs preserved."""
    p = p or partition_clusters(d)
    return ClusterViews(full=d, type_a=_subset(d, p.type_a), type_b=_subset(d, p.type_b), w_a=p.w_a)


def meets_type_b_minimum(p: ClusterPartition, minimum: int = MIN_TYPE_B_STOPS) -> bool:
    return len(p.stop_b) >= minimum


def cluster_mean_ssd(d: SstDataset, p: ClusterPartition) -> Tuple[Optional[float], Optional[float]]:
    """Mean SSD over type-A and type-B stop trials; None for an empty cluster."""
    ssd = {t.index: t.ssd_ms for t in d.trials if t.kind == "stop"}
    means = []
    for indices in (p.stop_a, p.stop_b):
        means.append(float(np.mean([ssd[i] for i in indices])) if indices else None)
    return means[0], means[1]
