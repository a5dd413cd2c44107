import math

import numpy as np
import pytest

from src.utils.ball_geometry import Point
from src.utils.measure_model import (
    Atom,
    BoundaryMeasure,
    Measure,
    RadialDensity,
    boundary_test_measures,
    cap_measure,
    lebesgue_measure,
)
from src.utils.smoothness_functional import (
    MEAN_SIDE,
    SMOOTHNESS_SIDE,
    GaugeFunction,
    boundedness_criterion,
    fit_exponent,
    gauge_compare,
    lemma1_check,
    log_damped_gauge,
    power_gauge,
    smoothness_lp,
    vanishing_check,
)
from src.utils.sphere_integration import BudgetPolicy, SphereSampler


def test_fit_exponent_recovers_a_power_law():
    points = [(2.0**-k, 3.0 * 2.0 ** (-2.5 * k)) for k in range(2, 9)]
    fit = fit_exponent(points)
    assert fit.slope == pytest.approx(2.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.residual_rms < 1e-12


def test_fit_exponent_rejects_bad_input():
    with pytest.raises(ValueError, match="grid point 1"):
        fit_exponent([(0.5, 1.0), (0.25, 0.0), (0.125, 1.0), (0.0625, 1.0)])
    with pytest.raises(ValueError, match="at least"):
        fit_exponent([(0.5, 1.0), (0.25, 1.0)])
    with pytest.raises(ValueError, match="geometric"):
        fit_exponent([(0.5, 1.0), (0.25, 1.0), (0.2, 1.0), (0.1, 1.0)])


def test_smoothness_of_the_zero_measure(sampler):
    estimate = smoothness_lp(Measure(2), 0.1, 1.25, sampler)
    assert estimate.value == 0.0 and estimate.std_error == 0.0


def test_smoothness_of_a_single_atom_is_exact(sampler):
    mu = Measure(2, atoms=(Atom(Point.ball(0.95, 0), 2.0),))
    p = 1.25
    estimate = smoothness_lp(mu, 0.1, p, sampler)
    expected = 2.0 * 0.05**2 * cap_measure(0.95, 0.1, 2) ** (1.0 / p)
    assert estimate.std_error == 0.0
    assert estimate.value == pytest.approx(expected, rel=1e-12)


def test_atom_out_of_reach_contributes_nothing(sampler):
    mu = Measure(2, atoms=(Atom(Point.ball(0.5, 0), 1.0),))
    assert smoothness_lp(mu, 0.1, 1.25, sampler).value == 0.0


def test_two_atoms_against_hit_counting(sampler):
    a = Point.ball(0.95, 0)
    b = Point.ball(0.0, 0.93j)
    mu = Measure(2, atoms=(Atom(a, 1.0), Atom(b, 1.0)))
    p = 1.25
    estimate = smoothness_lp(mu, 0.1, p, sampler, budget=BudgetPolicy(2**14, 2**17, 0.01))
    # the two caps are disjoint, so the p-th powers add
    expected = (
        (0.05**2) ** p * cap_measure(0.95, 0.1, 2) + (0.07**2) ** p * cap_measure(0.93, 0.1, 2)
    ) ** (1.0 / p)
    assert estimate.value == pytest.approx(expected, rel=0.03)


def test_lebesgue_smoothness_exponent(sampler):
    mu = lebesgue_measure(2)
    deltas = [2.0**-k for k in range(5, 11)]
    points = [(d, smoothness_lp(mu, d, 1.25, sampler).value) for d in deltas]
    # lambda(C(xi, delta)) ~ delta^{n+1} * delta^n for n = 2
    assert fit_exponent(points).slope == pytest.approx(5.0, abs=0.1)


def test_unweighted_smoothness_of_a_singular_density_is_infinite(sampler):
    mu = Measure(2, densities=(RadialDensity(alpha=-1.5),))
    assert math.isinf(smoothness_lp(mu, 0.1, 1.25, sampler, weighted=False).value)
    assert math.isfinite(smoothness_lp(mu, 0.1, 1.25, sampler).value)


def test_smoothness_validates_arguments(sampler):
    with pytest.raises(ValueError, match=r"delta=1.0. Must be in \(0, 1\)"):
        smoothness_lp(lebesgue_measure(2), 1.0, 1.25, sampler)
    with pytest.raises(ValueError):
        smoothness_lp(lebesgue_measure(2), 0.1, 1.0, sampler)


def dyadic(values_at, first=3, last=9):
    return [(2.0**-k, values_at(2.0**-k)) for k in range(first, last)]


def test_boundedness_criterion_with_both_sides_bounded():
    criterion = boundedness_criterion(dyadic(lambda s: 1.0 + s), dyadic(lambda d: 7.0 * d**2.5), n=2)
    assert criterion.bounded and criterion.agrees
    assert criterion.mean.normalized[0] == pytest.approx(1.125)


def test_boundedness_criterion_with_both_sides_growing():
    criterion = boundedness_criterion(dyadic(lambda s: s**-0.5), dyadic(lambda d: d**1.5), n=2)
    assert not criterion.bounded
    assert criterion.agrees
    assert criterion.smoothness.normalized[-1] == pytest.approx(2.0**2.5 * criterion.smoothness.normalized[0])


def test_boundedness_criterion_reports_disagreement():
    criterion = boundedness_criterion(dyadic(lambda s: 1.0), dyadic(lambda d: d), n=2)
    assert criterion.mean.bounded
    assert not criterion.smoothness.bounded
    assert not criterion.agrees
    with pytest.raises(ValueError, match="n > 1"):
        boundedness_criterion(dyadic(lambda s: 1.0), dyadic(lambda d: d), n=1)


def test_lemma1_on_empty_measure(sampler):
    record = lemma1_check(BoundaryMeasure(2, np.zeros((0, 2))), 0.1, 1.25, sampler)
    assert (record.lhs, record.rhs, record.ratio) == (0.0, 0.0, 0.0)


def test_lemma1_single_atom_ratio(sampler):
    nu = BoundaryMeasure(2, [[1.0, 0.0]], [2.0])
    delta = 0.1
    record = lemma1_check(nu, delta, 1.25, sampler, budget=BudgetPolicy(2**13, 2**15, 0.01))
    # both sides reduce to mass^p; the sigma-integral sees the cap of size sigma(D(xi, delta))
    sigma_cap = cap_measure(1.0, delta**2, 2)
    assert record.lhs == pytest.approx(2.0**1.25)
    assert record.rhs == pytest.approx(2.0**1.25 * sigma_cap, rel=1e-10)
    assert record.ratio == pytest.approx(delta**4 / sigma_cap, rel=1e-10)


def test_lemma1_with_p_one_uses_total_mass(sampler):
    nu = boundary_test_measures(2, seed=0)["scattered"]
    record = lemma1_check(nu, 0.2, 1.0, sampler, budget=BudgetPolicy(2**13, 2**15, 0.02))
    assert record.lhs == pytest.approx(nu.total_mass)


def test_lemma1_antipodal_atoms_do_not_interact(sampler):
    nu = BoundaryMeasure(2, [[1.0, 0.0], [-1.0, 0.0]], [1.0, 3.0])
    record = lemma1_check(nu, 0.2, 2.0, sampler, budget=BudgetPolicy(2**13, 2**15, 0.01))
    assert record.lhs == pytest.approx(1.0 + 9.0)


def test_lemma1_ratio_is_bounded_on_the_test_measures(sampler):
    budget = BudgetPolicy(2**13, 2**15, 0.05)
    for nu in boundary_test_measures(2, seed=0).values():
        for k in range(2, 6):
            record = lemma1_check(nu, 2.0**-k, 1.25, sampler, budget=budget, grid_index=k)
            assert 0 < record.ratio < 100


def test_lemma1_validates_arguments(sampler):
    nu = boundary_test_measures(2)["single"]
    with pytest.raises(ValueError):
        lemma1_check(nu, 0.5, 1.25, sampler)
    with pytest.raises(ValueError):
        lemma1_check(nu, 0.1, 0.5, sampler)


def test_gauges_validate():
    power_gauge(2.5).validate(2)
    log_damped_gauge(2.5).validate(2)
    assert log_damped_gauge(2.0)(0.0) == 0.0


def test_gauge_validation_failures():
    with pytest.raises(ValueError, match="exponent"):
        power_gauge(4.0).validate(2)
    with pytest.raises(ValueError, match="increasing"):
        GaugeFunction(lambda d: 1.0 - d, 1.0, "decreasing").validate(2)
    with pytest.raises(ValueError, match="violates"):
        GaugeFunction(lambda d: math.sqrt(d), 1.0, "sqrt").validate(2)


def test_gauge_compare_smoothness_side():
    gauge = power_gauge(2.0)
    series = [(2.0**-k, 5.0 * 2.0 ** (-2 * k)) for k in range(3, 9)]
    comparison = gauge_compare(series, gauge, SMOOTHNESS_SIDE)
    assert comparison.bounded
    assert comparison.ratio == pytest.approx(1.0)
    assert comparison.margin == pytest.approx(3.0)


def test_gauge_compare_detects_growth():
    gauge = power_gauge(3.0)
    series = [(2.0**-k, 2.0 ** (-2 * k)) for k in range(3, 9)]
    comparison = gauge_compare(series, gauge, SMOOTHNESS_SIDE)
    assert not comparison.bounded
    assert comparison.normalized[-1] == pytest.approx(32.0 * comparison.normalized[0])


def test_gauge_compare_mean_side_uses_the_boundary_weight():
    gauge = power_gauge(3.0)
    # m_p ~ (1 - r)^{gamma - n}, so (1 - r)^n m_p / Phi is flat
    series = [(2.0**-k, 2.0**-k) for k in range(3, 9)]
    comparison = gauge_compare(series, gauge, MEAN_SIDE, n=2)
    assert comparison.bounded
    assert comparison.ratio == pytest.approx(1.0)


def test_gauge_compare_validates_arguments():
    gauge = power_gauge(2.0)
    with pytest.raises(ValueError, match="needs the dimension"):
        gauge_compare([(0.5, 1.0)], gauge, MEAN_SIDE)
    with pytest.raises(ValueError, match="Must be mean-side or smoothness-side"):
        gauge_compare([(0.5, 1.0)], gauge, "sideways")
    with pytest.raises(ValueError, match="grid point 1"):
        gauge_compare([(0.5, 1.0), (0.25, 0.0)], gauge, SMOOTHNESS_SIDE)


@pytest.mark.parametrize(
    "values, decreasing, passed",
    [
        ([1.0, 0.8, 0.4, 0.2, 0.1], True, True),
        ([1.0, 1.2, 0.6, 0.3, 0.1], True, True),
        ([1.0, 0.8, 0.9, 0.2, 0.1], False, False),
        ([1.0, 0.9, 0.8, 0.7, 0.6], True, False),
        ([1.0, 0.5, 0.0, 0.0, 0.0], True, True),
    ],
)
def test_vanishing_check(values, decreasing, passed):
    check = vanishing_check(values)
    assert check.decreasing is decreasing
    assert check.passed is passed


def test_vanishing_check_threshold_and_validation():
    check = vanishing_check([1.0, 0.9, 0.8, 0.7, 0.6])
    assert check.passes(threshold=0.7)
    with pytest.raises(ValueError):
        vanishing_check([1.0, 0.5])
    with pytest.raises(ValueError):
        vanishing_check([1.0, -0.5, 0.2])


def test_vanishing_check_with_a_zero_head():
    assert vanishing_check([0.0, 0.0, 0.0]).passed
    assert vanishing_check([0.0, 0.0, 0.0, 0.0]).last_over_first == 0.0
    rising = vanishing_check([0.0, 0.0, 0.3, 0.1])
    assert not rising.decreasing
    assert not rising.passed
