import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from ssrt_mixture.errors import EstimatorUndefinedError, PreconditionError
from ssrt_mixture.indices import (
    logan_from_arrays,
    ssrt_crude,
    ssrt_logan1994,
    ssrt_weighted,
    weighted_at,
)
from ssrt_mixture.racesim import partition_clusters, simulate_cohort, simulate_sst
from ssrt_mixture.types import ConstantSsrtReport, DesignConfig, ExGaussianParams, SessionMeta, SstDataset, Trial


def build(layout):
    """layout: list of ("go", rt) or ("stop", ssd, rt_or_None)."""
    trials = []
    for i, item in enumerate(layout, start=1):
        if item[0] == "go":
            trials.append(Trial(index=i, kind="go", rt_ms=item[1]))
        else:
            _, ssd, rt = item
            trials.append(Trial(index=i, kind="stop", ssd_ms=ssd, rt_ms=rt, inhibited=rt is None))
    n_stop = sum(1 for item in layout if item[0] == "stop")
    return SstDataset(trials=trials, meta=SessionMeta(n_trials=len(layout), stop_fraction=n_stop / len(layout)))


def test_crude_constant_session():
    d = build([("go", 500.0), ("stop", 250.0, None), ("go", 500.0), ("stop", 250.0, 480.0)])
    assert ssrt_crude(d) == 250.0


def test_crude_requires_stop_trials():
    with pytest.raises(PreconditionError):
        ssrt_crude(build([("go", 500.0), ("go", 510.0)]))


def test_logan_median_at_half_inhibition():
    d = build([
        ("go", 400.0), ("stop", 200.0, None), ("go", 450.0), ("stop", 300.0, 420.0),
        ("go", 500.0), ("stop", 200.0, None), ("go", 550.0), ("stop", 300.0, 430.0), ("go", 600.0),
    ])
    assert d.inhibition_rate() == 0.5
    assert ssrt_logan1994(d) == pytest.approx(500.0 - 250.0)


def test_logan_deterministic_go():
    d = build([("go", 480.0)] * 3 + [("stop", 200.0, None), ("stop", 250.0, 470.0), ("stop", 150.0, None)])
    assert ssrt_logan1994(d) == pytest.approx(480.0 - 200.0)


def test_logan_linear_quantile():
    go = np.array([100.0, 200.0, 300.0, 400.0])
    # 1 - 0.25 = 0.75 quantile of 4 points -> 325
    assert logan_from_arrays(go, np.array([100.0]), 0.25) == pytest.approx(225.0)


@pytest.mark.parametrize("rt", [None, 470.0])
def test_logan_undefined_at_extreme_inhibition(rt):
    d = build([("go", 480.0), ("stop", 200.0, rt), ("go", 490.0), ("stop", 250.0, rt)])
    with pytest.raises(EstimatorUndefinedError):
        ssrt_logan1994(d)


def test_recovery_of_mean_ssrt_with_symmetric_go():
    go = ExGaussianParams(mu=450.0, sigma=50.0, tau=1.0)
    stop = ExGaussianParams(mu=200.0, sigma=1.0, tau=1.0)
    d = simulate_sst(go, stop, DesignConfig(n_trials=10_000), seed=17)
    assert ssrt_crude(d) == pytest.approx(201.0, abs=15.0)
    assert ssrt_logan1994(d) == pytest.approx(201.0, abs=15.0)


def test_weighted_equals_type_a_when_all_stops_follow_go():
    layout = []
    rts = [460.0, 520.0, 480.0, 540.0, 500.0, 560.0]
    for k in range(6):
        layout += [("go", rts[k]), ("go", rts[-k - 1]), ("stop", 200.0 + 10 * k, None if k % 2 else 430.0)]
    d = build(layout)
    report = ssrt_weighted(d)
    assert report.w_a == 1.0
    assert report.ssrt_b_ms is None
    assert report.weighted_ms == pytest.approx(report.ssrt_a_ms)


def test_report_identity_and_reweighting():
    d = simulate_sst(ExGaussianParams(mu=450, sigma=50, tau=100), ExGaussianParams(mu=220, sigma=30, tau=50),
                     DesignConfig(n_trials=960), seed=21)
    report = ssrt_weighted(d)
    assert report.weighted_ms == pytest.approx(report.w_a * report.ssrt_a_ms + (1 - report.w_a) * report.ssrt_b_ms,
                                               abs=1e-9)
    assert weighted_at(report, 1.0) == pytest.approx(report.ssrt_a_ms)
    assert weighted_at(report, 0.0) == pytest.approx(report.ssrt_b_ms)
    slope = report.ssrt_a_ms - report.ssrt_b_ms
    assert weighted_at(report, 0.3) - weighted_at(report, 0.2) == pytest.approx(0.1 * slope)
    assert 0.0 <= report.p_inhibit <= 1.0
    assert report.go_source == "cluster"


def test_go_source_all_uses_every_go_trial():
    d = simulate_sst(ExGaussianParams(mu=450, sigma=50, tau=100), ExGaussianParams(mu=220, sigma=30, tau=50),
                     DesignConfig(n_trials=960), seed=22)
    p = partition_clusters(d)
    cluster = ssrt_weighted(d, p, go_source="cluster")
    pooled = ssrt_weighted(d, p, go_source="all")
    assert pooled.go_source == "all"
    assert pooled.crude_ms == cluster.crude_ms
    assert pooled.logan1994_ms == cluster.logan1994_ms
    assert pooled.ssrt_a_ms != cluster.ssrt_a_ms


def test_report_rejects_broken_identity():
    with pytest.raises(ValueError):
        ConstantSsrtReport(
            crude_ms=200.0, logan1994_ms=210.0, weighted_ms=999.0, ssrt_a_ms=200.0, ssrt_b_ms=220.0,
            w_a=0.75, p_inhibit=0.5, mean_ssd_ms=250.0,
        )


def test_weighted_exceeds_logan_when_type_b_stopping_is_slow():
    go = ExGaussianParams(mu=400.0, sigma=60.0, tau=80.0)
    stop_a = ExGaussianParams(mu=150.0, sigma=10.0, tau=10.0)
    stop_b = ExGaussianParams(mu=350.0, sigma=10.0, tau=10.0)
    sessions = simulate_cohort(go, stop_a, 20, DesignConfig(n_trials=9600), seed=5, stop_b=stop_b)
    wins = 0
    for d in sessions:
        report = ssrt_weighted(d)
        wins += report.weighted_ms > report.logan1994_ms
    assert wins >= 19


def test_identical_clusters_give_similar_indices():
    go = ExGaussianParams(mu=450.0, sigma=50.0, tau=100.0)
    stop = ExGaussianParams(mu=220.0, sigma=30.0, tau=50.0)
    sessions = simulate_cohort(go, stop, 50, DesignConfig(n_trials=960), seed=31)
    diffs = [ssrt_weighted(d).weighted_ms - ssrt_weighted(d).logan1994_ms for d in sessions]
    assert abs(np.mean(diffs)) < 15.0
