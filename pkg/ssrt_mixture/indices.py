"""Constant SSRT point indices: crude, Logan (1994) integration, and cluster-weighted."""

from typing import Literal, Optional

import numpy as np

from logging_config import get_logger

from .errors import EstimatorUndefinedError, PreconditionError
from .racesim import extract_views, partition_clusters
from .types import ClusterPartition, ConstantSsrtReport, SstDataset
from .utils import check_probability

logger = get_logger(__name__)


def _require(d: SstDataset, what: str = "session"):
    go_rts = d.go_rts()
    ssds = d.stop_ssds()
    if go_rts.size == 0:
        raise PreconditionError(f"{what} has no go trials")
    if ssds.size == 0:
        raise PreconditionError(f"{what} has no stop trials")
    return go_rts, ssds


def ssrt_crude(d: SstDataset) -> float:
    """Mean go RT minus mean SSD."""
    go_rts, ssds = _require(d)
    return float(go_rts.mean() - ssds.mean())


def logan_from_arrays(go_rts: np.ndarray, ssds: np.ndarray, p_inhibit: float) -> float:
    """
    Go-RT quantile at 1 - P(SI) minus mean SSD.

    The quantile interpolates linearly between order statistics.
    """
    if p_inhibit <= 0.0 or p_inhibit >= 1.0:
        raise EstimatorUndefinedError(
            f"Logan estimator undefined for inhibition proportion {p_inhibit}"
        )
    q = np.quantile(np.asarray(go_rts, dtype=float), 1.0 - p_inhibit, method="linear")
    return float(q - np.mean(ssds))


def ssrt_logan1994(d: SstDataset, go_rts: Optional[np.ndarray] = None) -> float:
    """
    Logan (1994) integration SSRT of a session.

    `go_rts` overrides the go distribution used for the quantile, e.g. all
    go trials of the session when `d` is a cluster view.
    """
    own_go, ssds = _require(d)
    go = own_go if go_rts is None else np.asarray(go_rts, dtype=float)
    if go.size == 0:
        raise PreconditionError("no go RTs for the quantile")
    return logan_from_arrays(go, ssds, d.inhibition_rate())


def ssrt_weighted(
    d: SstDataset,
    p: Optional[ClusterPartition] = None,
    go_source: Literal["cluster", "all"] = "cluster",
) -> ConstantSsrtReport:
    """
    Weighted SSRT: w_a * SSRT_A + (1 - w_a) * SSRT_B, each a Logan index of its
    cluster view, returned with the crude and Logan indices of the full session.
    """
    p = p or partition_clusters(d)
    views = extract_views(d, p)
    all_go = d.go_rts() if go_source == "all" else None

    ssrt_a = ssrt_b = None
    if p.stop_a:
        ssrt_a = ssrt_logan1994(views.type_a, all_go)
    if p.stop_b:
        ssrt_b = ssrt_logan1994(views.type_b, all_go)

    weighted = 0.0
    if ssrt_a is not None:
        weighted += p.w_a * ssrt_a
    if ssrt_b is not None:
        weighted += (1.0 - p.w_a) * ssrt_b

    report = ConstantSsrtReport(
        crude_ms=ssrt_crude(d),
        logan1994_ms=ssrt_logan1994(d),
        weighted_ms=weighted,
        ssrt_a_ms=ssrt_a,
        ssrt_b_ms=ssrt_b,
        w_a=p.w_a,
        p_inhibit=d.inhibition_rate(),
        mean_ssd_ms=float(d.stop_ssds().mean()),
        go_source=go_source,
    )
    logger.debug(
        f"Indices: crude {report.crude_ms:.1f}, logan {report.logan1994_ms:.1f}, "
        f"weighted {report.weighted_ms:.1f} (w_a={p.w_a:.3f})"
    )
    return report


def weighted_at(report: ConstantSsrtReport, w_a: float) -> float:
    """Re-weight the cluster indices of a report at another w_a."""
    check_probability(w_a, "w_a", open_interval=False)
    if report.ssrt_a_ms is None or report.ssrt_b_ms is None:
        raise PreconditionError("re-weighting needs both cluster indices")
    return w_a * report.ssrt_a_ms + (1.0 - w_a) * report.ssrt_b_ms
