import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from ssrt_mixture.analysis import colonius_cdf, colonius_mixture_cdf, individual_comparison, weight_sweep
from ssrt_mixture.errors import NumericalError, ParameterDomainError
from ssrt_mixture.exgauss import exg_cdf
from ssrt_mixture.mixture import make_mixture, mixture_moments, mixture_shape
from ssrt_mixture.types import ExGaussianParams, KsResult, PspdtConfig, SubjectClusterParams, SweepConfig

GO = ExGaussianParams(mu=450.0, sigma=50.0, tau=100.0)
STOP = ExGaussianParams(mu=220.0, sigma=30.0, tau=50.0)

REFERENCE = SubjectClusterParams(
    theta_s=ExGaussianParams(mu=93.2, sigma=116.2, tau=103.6),
    theta_a=ExGaussianParams(mu=160.0, sigma=100.0, tau=105.0),
    theta_b=ExGaussianParams(mu=150.0, sigma=100.0, tau=103.6),
)


def random_race(rng):
    go = ExGaussianParams(mu=rng.uniform(300, 600), sigma=rng.uniform(20, 80), tau=rng.uniform(20, 150))
    stop = ExGaussianParams(mu=rng.uniform(100, 300), sigma=rng.uniform(10, 60), tau=rng.uniform(10, 100))
    return go, stop, float(rng.uniform(50, 300))


def test_colonius_recovers_the_stop_cdf():
    rng = np.random.default_rng(0)
    t = np.linspace(50, 400, 36)
    for _ in range(20):
        go, stop, t_d = random_race(rng)
        np.testing.assert_allclose(colonius_cdf(go, stop, t_d, t), exg_cdf(stop, t), atol=1e-6)


def test_colonius_shape():
    t = np.linspace(10, 1000, 100)
    f = colonius_cdf(GO, STOP, 250.0, t)
    assert np.all(np.diff(f) >= 0)
    assert np.all((f >= 0) & (f <= 1))
    assert colonius_cdf(GO, STOP, 250.0, 2000.0) == pytest.approx(1.0, abs=1e-9)
    assert isinstance(colonius_cdf(GO, STOP, 250.0, 300.0), float)


def test_colonius_domain_errors():
    with pytest.raises(ParameterDomainError):
        colonius_cdf(GO, STOP, 0.0, 100.0)
    with pytest.raises(ParameterDomainError):
        colonius_cdf(GO, STOP, 250.0, [100.0, 0.0])


def test_colonius_go_density_underflow():
    with pytest.raises(NumericalError) as excinfo:
        colonius_cdf(ExGaussianParams(mu=450.0, sigma=10.0, tau=5.0), STOP, 250.0, 10_000.0)
    assert "min_log_f_go" in excinfo.value.diagnostics


def test_colonius_mixture_is_the_weighted_sum():
    stop_b = ExGaussianParams(mu=300.0, sigma=40.0, tau=60.0)
    go_b = ExGaussianParams(mu=480.0, sigma=60.0, tau=90.0)
    t = np.linspace(50, 600, 12)
    mixed = colonius_mixture_cdf(GO, STOP, 240.0, go_b, stop_b, 260.0, 0.7, t)
    expected = 0.7 * exg_cdf(STOP, t) + 0.3 * exg_cdf(stop_b, t)
    np.testing.assert_allclose(mixed, expected, atol=1e-6)
    np.testing.assert_allclose(
        colonius_mixture_cdf(GO, STOP, 240.0, go_b, stop_b, 260.0, 0.0, t),
        colonius_cdf(go_b, stop_b, 260.0, t),
    )
    with pytest.raises(ParameterDomainError):
        colonius_mixture_cdf(GO, STOP, 240.0, go_b, stop_b, 260.0, 1.5, t)


def test_sweep_on_reference_cohort():
    sweep = weight_sweep([REFERENCE], grid=[0.0, 0.59, 0.75, 1.0])
    slope, intercept = sweep.mean_coefficients
    assert slope == pytest.approx(11.4)
    assert intercept == pytest.approx(56.8)
    assert sweep.delta_mean[1] == pytest.approx(63.5, abs=0.05)
    assert sweep.delta_mean[2] == pytest.approx(65.35, abs=0.05 + 1e-9)
    a2, a1, a0 = sweep.var_coefficients
    assert a2 == pytest.approx(-11.4 ** 2)
    assert a1 / (2 * 11.4 ** 2) > 1.0
    assert sweep.argmax_var_w == 1.0
    assert sweep.pspdt_stat is None


def test_sweep_matches_mixture_moments_per_subject():
    second = SubjectClusterParams(
        theta_s=ExGaussianParams(mu=120.0, sigma=40.0, tau=60.0),
        theta_a=ExGaussianParams(mu=90.0, sigma=30.0, tau=40.0),
        theta_b=ExGaussianParams(mu=200.0, sigma=50.0, tau=80.0),
    )
    cohort = [REFERENCE, second]
    sweep = weight_sweep(cohort, SweepConfig(grid_points=11))
    for i, w in enumerate(sweep.grid):
        gaps_mean, gaps_var = [], []
        for c in cohort:
            m = make_mixture(w, c.theta_a, c.theta_b)
            gaps_mean.append(mixture_moments(m)[0] - c.theta_s.mean)
            gaps_var.append(mixture_shape(m)[0] - c.theta_s.variance)
        assert sweep.delta_mean[i] == pytest.approx(np.mean(gaps_mean), abs=1e-6)
        assert sweep.delta_var[i] == pytest.approx(np.mean(gaps_var), abs=1e-4)


def test_sweep_argmax_agrees_with_grid():
    subject = SubjectClusterParams(
        theta_s=ExGaussianParams(mu=150.0, sigma=20.0, tau=20.0),
        theta_a=ExGaussianParams(mu=300.0, sigma=20.0, tau=20.0),
        theta_b=ExGaussianParams(mu=100.0, sigma=20.0, tau=20.0),
    )
    sweep = weight_sweep([subject])
    assert len(sweep.grid) == 101
    assert sweep.argmax_var_w == pytest.approx(0.5)
    assert sweep.grid[int(np.argmax(sweep.delta_var))] == pytest.approx(sweep.argmax_var_w, abs=0.01)


@pytest.mark.parametrize("theta_a,theta_b,expected", [
    ((210.0, 200.0, 80.0), (200.0, 20.0, 80.0), 1.0),
    ((200.0, 20.0, 80.0), (210.0, 200.0, 80.0), 0.0),
])
def test_sweep_argmax_stays_on_the_unit_interval(theta_a, theta_b, expected):
    subject = SubjectClusterParams(
        theta_s=ExGaussianParams(mu=200.0, sigma=50.0, tau=80.0),
        theta_a=ExGaussianParams(mu=theta_a[0], sigma=theta_a[1], tau=theta_a[2]),
        theta_b=ExGaussianParams(mu=theta_b[0], sigma=theta_b[1], tau=theta_b[2]),
    )
    sweep = weight_sweep([subject])
    _, a1, _ = sweep.var_coefficients
    assert not 0.0 <= a1 / 200.0 <= 1.0
    assert sweep.argmax_var_w == expected
    assert sweep.grid[int(np.argmax(sweep.delta_var))] == pytest.approx(expected)


def test_sweep_with_equal_cluster_means():
    theta = ExGaussianParams(mu=150.0, sigma=30.0, tau=40.0)
    subject = SubjectClusterParams(theta_s=theta, theta_a=theta, theta_b=theta)
    sweep = weight_sweep([subject], SweepConfig(grid_points=5))
    assert sweep.argmax_var_w is None
    assert sweep.delta_var == [0.0] * 5
    assert sweep.delta_mean == [0.0] * 5


def test_sweep_input_errors():
    with pytest.raises(ParameterDomainError):
        weight_sweep([])
    with pytest.raises(ParameterDomainError):
        weight_sweep([REFERENCE], grid=[0.5, 1.2])


def test_sweep_with_pspdt():
    config = SweepConfig(pspdt=PspdtConfig(k=5, n_null=0, seed=1))
    sweep = weight_sweep([REFERENCE], config, grid=[0.0, 0.5, 1.0])
    assert len(sweep.pspdt_stat) == 3
    assert sweep.pspdt_cutoff == pytest.approx(1.3581 * np.sqrt(2 / 96), abs=1e-4)
    assert sweep.pspdt_mc_p == [None, None, None]


def test_individual_comparison():
    mixture = make_mixture(0.75, REFERENCE.theta_a, REFERENCE.theta_b)
    row = individual_comparison(REFERENCE.theta_s, mixture, seed=3)
    assert isinstance(row.two_sided, KsResult)
    assert row.two_sided.n == 96 and row.two_sided.m == 96
    assert row.two_sided.statistic == pytest.approx(max(row.greater.statistic, row.less.statistic))
    assert row == individual_comparison(REFERENCE.theta_s, mixture, seed=3)
