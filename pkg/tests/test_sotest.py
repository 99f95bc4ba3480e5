import math
import os
import sys

import numpy as np
import pytest
from scipy import stats

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from ssrt_mixture.errors import ParameterDomainError, PreconditionError
from ssrt_mixture.exgauss import exg_sample
from ssrt_mixture.mixture import make_mixture
from ssrt_mixture.sotest import (
    PRINTED_COEFFICIENT,
    compare_overall,
    critical_coefficient,
    ks_p_value,
    ks_statistic,
    ks_two_sample,
    null_rejection_rate,
    paired_t_test,
    pspdt,
)
from ssrt_mixture.types import ExGaussianParams, OverallDistributions, PspdtConfig, PspdtResult
from ssrt_mixture.utils import make_rng, spawn_seeds

THETA_S = ExGaussianParams(mu=78.4, sigma=93.9, tau=73.1)
THETA_A = ExGaussianParams(mu=94.0, sigma=134.5, tau=104.8)
THETA_B = ExGaussianParams(mu=90.9, sigma=142.3, tau=99.0)
MIXTURE = make_mixture(0.59, THETA_A, THETA_B)


@pytest.mark.parametrize("alternative", ["two-sided", "greater", "less"])
def test_statistic_matches_scipy(alternative):
    rng = np.random.default_rng(1)
    x = rng.normal(0.0, 1.0, 80)
    y = rng.normal(0.3, 1.2, 120)
    expected = stats.ks_2samp(x, y, alternative=alternative).statistic
    assert ks_statistic(x, y, alternative) == pytest.approx(expected, abs=1e-12)


def test_two_sided_p_value_is_kolmogorov_survival():
    d, n, m = 0.2, 96, 96
    en = n * m / (n + m)
    assert ks_p_value(d, n, m) == pytest.approx(stats.kstwobign.sf(math.sqrt(en) * d))
    assert ks_p_value(d, n, m, "greater") == pytest.approx(math.exp(-2.0 * en * d * d))
    assert ks_p_value(0.0, n, m) == 1.0


def test_direction_of_one_sided_alternatives():
    # x stochastically smaller: its ecdf lies above
    rng = np.random.default_rng(2)
    x = rng.normal(0.0, 1.0, 200)
    y = rng.normal(1.0, 1.0, 200)
    assert ks_two_sample(x, y, "greater").p_value < 0.001
    assert ks_two_sample(x, y, "less").p_value > 0.1
    result = ks_two_sample(x, y)
    assert result.n == 200 and result.m == 200
    assert result.alternative == "two-sided"


def test_ks_input_validation():
    with pytest.raises(ParameterDomainError):
        ks_two_sample([1.0, 2.0], [3.0], "sideways")
    with pytest.raises(ParameterDomainError):
        ks_two_sample([], [1.0])
    with pytest.raises(ParameterDomainError):
        ks_two_sample([1.0, np.nan], [1.0])


def test_critical_coefficients():
    assert critical_coefficient(0.05) == pytest.approx(1.3581, abs=1e-4)
    assert critical_coefficient(0.05, "greater") == pytest.approx(1.2239, abs=1e-4)
    assert critical_coefficient(0.05, critical="printed") == PRINTED_COEFFICIENT
    assert PRINTED_COEFFICIENT == pytest.approx(0.5887, abs=1e-4)
    with pytest.raises(ParameterDomainError):
        critical_coefficient(0.0)


def test_single_pair_pspdt_is_the_two_sample_test():
    config = PspdtConfig(k=1, n_null=0, seed=3)
    result = pspdt(THETA_S, THETA_A, config)
    rng = make_rng(spawn_seeds(3, 1)[0])
    x = exg_sample(THETA_S, 96, rng)
    y = exg_sample(THETA_A, 96, rng)
    assert result.d_bar == pytest.approx(ks_two_sample(x, y).statistic)
    assert result.critical_value == pytest.approx(1.3581 * math.sqrt(2 / 96), abs=1e-4)
    assert result.mc_p_value is None


def test_single_differs_from_mixture():
    result = pspdt(THETA_S, MIXTURE, PspdtConfig(seed=4))
    assert 0.15 <= result.d_bar <= 0.25
    assert result.mc_p_value < 0.01
    assert len(result.per_k) == 44


def test_mean_distance_over_many_seeds():
    result = pspdt(THETA_S, MIXTURE, PspdtConfig(k=200, n_null=0, seed=40))
    assert 0.18 <= result.d_bar <= 0.24
    assert len(result.per_k) == 200


def test_type_b_and_type_a_components_are_close():
    result = pspdt(THETA_B, THETA_A, PspdtConfig(seed=5, n_null=0))
    assert not result.reject


def test_pspdt_is_reproducible_and_thread_independent():
    config = PspdtConfig(k=10, n_null=20, seed=6)
    a = pspdt(THETA_S, MIXTURE, config)
    b = pspdt(THETA_S, MIXTURE, config.model_copy(update={"threads": 3}))
    assert a == b


def test_quantile_sampling_of_identical_distributions():
    result = pspdt(MIXTURE, MIXTURE, PspdtConfig(k=5, sampling="quantile"))
    assert result.d_bar == 0.0
    assert result.per_k == [0.0] * 5
    assert result.mc_p_value is None
    assert not result.reject


def test_null_rejection_rate_is_small():
    config = PspdtConfig(k=44, n_null=0, seed=7)
    assert null_rejection_rate(THETA_S, config, n_runs=100) <= 0.05
    with pytest.raises(ParameterDomainError):
        null_rejection_rate(THETA_S, config, n_runs=0)


def test_result_rejects_inconsistent_decision():
    with pytest.raises(ValueError):
        PspdtResult(
            d_bar=0.3, k=1, n=96, m=96, alpha=0.05, alternative="two-sided",
            coefficient=1.36, critical_value=0.196, reject=False, per_k=[0.3],
        )


def test_compare_overall_rows():
    overall = OverallDistributions(single=THETA_S, mixture=MIXTURE)
    rows = compare_overall(overall, PspdtConfig(k=5, n_null=10, seed=8))
    assert [r.label for r in rows] == ["single vs mixture", "single vs B", "single vs A", "B vs A"]
    for row in rows:
        assert row.two_sided.alternative == "two-sided"
        assert row.greater.alternative == "greater"
        assert row.less.alternative == "less"
        assert row.greater.coefficient < row.two_sided.coefficient


def test_paired_t_matches_scipy():
    rng = np.random.default_rng(9)
    a = rng.normal(200.0, 30.0, 25)
    b = a - rng.normal(15.0, 10.0, 25)
    result = paired_t_test(a, b)
    expected = stats.ttest_rel(a, b)
    assert result.t_statistic == pytest.approx(expected.statistic)
    assert result.p_value == pytest.approx(expected.pvalue)
    assert result.df == 24
    lo, hi = result.ci95
    ci = expected.confidence_interval(0.95)
    assert (lo, hi) == pytest.approx((ci.low, ci.high))
    assert lo < result.mean_diff < hi
    assert (lo + hi) / 2 == pytest.approx(result.mean_diff)


def test_paired_t_with_constant_differences():
    a = [210.0, 220.0, 230.0]
    result = paired_t_test(a, [v - 5.0 for v in a])
    assert result.p_undefined
    assert result.mean_diff == pytest.approx(5.0)
    assert result.p_value is None and result.t_statistic is None


def test_paired_t_input_checks():
    with pytest.raises(ParameterDomainError):
        paired_t_test([1.0, 2.0], [1.0])
    with pytest.raises(PreconditionError):
        paired_t_test([1.0], [2.0])
