"""Test p-values, martingale updates and threshold design."""

import math

import numpy
import pytest

import exmart as xm
from exmart import martingale


def test_p_value_of_identical_scores():
    p = martingale.compute_p_value([5.0, 5.0, 5.0, 5.0], 1.0 - 1e-6)
    assert p == pytest.approx(1.0, abs=1e-5)


def test_p_value_of_strangest_point():
    p = martingale.compute_p_value([1.0, 2.0, 3.0, 9.0], 1.0 - 1e-6)
    assert p == pytest.approx(0.25, abs=1e-6)


def test_p_value_counts_ties():
    assert martingale.compute_p_value([1.0, 3.0, 2.0, 2.0], 0.5) == 0.5  # noqa: PLR2004


def test_p_value_of_single_point_is_theta():
    assert martingale.compute_p_value([0.7], 0.3) == pytest.approx(0.3)


def test_p_value_rejects_bad_input():
    with pytest.raises(ValueError):
        martingale.compute_p_value([], 0.5)
    with pytest.raises(ValueError):
        martingale.compute_p_value([1.0, 2.0], 0.0)
    with pytest.raises(ValueError):
        martingale.compute_p_value([1.0, 2.0], 1.0)


def test_p_value_is_monotone_in_newest_score():
    rng = numpy.random.default_rng(3)
    bag = list(rng.uniform(0.0, 2.0, 30))
    previous = math.inf
    for newest in numpy.linspace(-1.0, 3.0, 41):
        p = martingale.compute_p_value([*bag, newest], 0.4)
        assert 0.0 < p <= 1.0
        assert p <= previous
        previous = p


def test_p_value_depends_only_on_ranks():
    rng = numpy.random.default_rng(5)
    scores = rng.uniform(0.0, 3.0, 50)
    scores[-1] = scores[10]
    assert martingale.compute_p_value(
        scores, 0.25
    ) == martingale.compute_p_value(numpy.exp(scores), 0.25)


def test_draw_theta_bounds():
    rng = numpy.random.default_rng(0)
    draws = [martingale.draw_theta(rng) for _ in range(1000)]
    assert min(draws) >= martingale.THETA_LOW
    assert max(draws) <= martingale.THETA_HIGH


def test_update_factor_values():
    assert martingale.martingale_update_factor(0.1, 0.92) == pytest.approx(
        1.1061, rel=1e-4
    )
    assert martingale.martingale_update_factor(1.0, 0.92) == pytest.approx(
        0.92
    )
    assert martingale.martingale_update_factor(0.35265, 0.92) == pytest.approx(
        1.0, abs=1e-4
    )


def test_update_factor_rejects_zero_p_value():
    with pytest.raises(ValueError):
        martingale.martingale_update_factor(0.0, 0.92)
    with pytest.raises(ValueError):
        martingale.log_update_factor(0.5, 1.0)


def test_log_space_matches_direct_product():
    rng = numpy.random.default_rng(11)
    p_values = rng.uniform(1e-4, 1.0, 1000)
    log_m = sum(martingale.log_update_factor(p, 0.92) for p in p_values)
    direct = numpy.prod(0.92 * p_values ** (0.92 - 1.0))
    assert math.exp(log_m) == pytest.approx(direct, rel=1e-9)


def test_update_factor_has_mean_one_under_uniform_p_values():
    rng = numpy.random.default_rng(2024)
    p_values = rng.uniform(martingale.THETA_LOW, 1.0, 10**6)
    factors = numpy.fromiter(
        (martingale.martingale_update_factor(p, 0.92) for p in p_values),
        dtype=numpy.float64,
        count=p_values.shape[0],
    )
    assert float(factors.mean()) == pytest.approx(1.0, abs=0.01)


def test_likelihood_ratio_crossover():
    crossover = martingale.likelihood_ratio_crossover(0.92)
    assert crossover == pytest.approx(0.35265, abs=1e-5)
    assert crossover < 1.0 / math.e
    assert martingale.likelihood_ratio(crossover, 0.92) == pytest.approx(1.0)
    assert martingale.likelihood_ratio_crossover(
        0.99
    ) > martingale.likelihood_ratio_crossover(0.5)


def test_threshold_from_design():
    assert martingale.threshold_from_design(
        xm.datatypes.TestDesign(0.05, 0.1)
    ) == pytest.approx(18.0)
    assert martingale.threshold_from_design(
        xm.datatypes.TestDesign(0.05)
    ) == pytest.approx(20.0)
    assert martingale.threshold_from_design(
        xm.datatypes.TestDesign(1.0 - 1e-12)
    ) == pytest.approx(1.0)


def test_design_rejects_zero_alpha():
    with pytest.raises(xm.interfaces.ConfigurationError):
        xm.datatypes.TestDesign(0.0)
    with pytest.raises(xm.interfaces.ConfigurationError):
        xm.datatypes.TestDesign(0.05, 1.0)


def test_size_inverts_threshold():
    threshold = martingale.threshold_from_design(
        xm.datatypes.TestDesign(0.02, 0.2)
    )
    assert martingale.size_from_threshold(threshold, 0.2) == pytest.approx(
        0.02
    )


def test_doob_bound():
    assert martingale.doob_false_alarm_bound(20.0) == pytest.approx(0.05)
    assert martingale.doob_false_alarm_bound(4.0) == pytest.approx(0.25)
    assert martingale.doob_false_alarm_bound(1.0) == 1.0
    assert martingale.doob_false_alarm_bound(0.5) == 1.0


def test_mean_delay_estimate():
    delay = martingale.estimate_mean_delay(10.0, 0.0, [0.1] * 50, 0.92)
    expected = math.log(10.0) / math.log(0.92 * 0.1 ** (-0.08))
    assert delay == pytest.approx(expected)
    assert delay == pytest.approx(22.8, abs=0.1)


def test_mean_delay_scales_with_beta():
    full = martingale.estimate_mean_delay(10.0, 0.0, [0.05, 0.2], 0.92)
    reduced = martingale.estimate_mean_delay(10.0, 0.5, [0.05, 0.2], 0.92)
    assert reduced == pytest.approx(full / 2.0)


def test_mean_delay_at_unit_threshold_is_zero():
    assert martingale.estimate_mean_delay(1.0, 0.0, [0.1], 0.92) == 0.0


def test_mean_delay_undefined_at_crossover():
    with pytest.raises(xm.interfaces.UndefinedDelayError):
        martingale.estimate_mean_delay(10.0, 0.0, [0.35265] * 20, 0.92)
    with pytest.raises(xm.interfaces.UndefinedDelayError):
        martingale.estimate_mean_delay(10.0, 0.0, [0.9] * 20, 0.92)


def test_mean_delay_rejects_bad_input():
    with pytest.raises(ValueError):
        martingale.estimate_mean_delay(0.5, 0.0, [0.1], 0.92)
    with pytest.raises(ValueError):
        martingale.estimate_mean_delay(10.0, 0.0, [0.0], 0.92)
    with pytest.raises(ValueError):
        martingale.estimate_mean_delay(10.0, 0.0, [], 0.92)
    with pytest.raises(ValueError):
        martingale.estimate_mean_delay(10.0, 0.0, [0.1], 0.92, tolerance=-1.0)


def test_zero_tolerance_keeps_tiny_positive_evidence():
    # 0.35265 sits just below the exact crossover, so mean(L) is ~7e-7
    delay = martingale.estimate_mean_delay(
        10.0, 0.0, [0.35265] * 20, 0.92, tolerance=0.0
    )
    assert math.isfinite(delay)
    assert delay > 1e5  # noqa: PLR2004
