import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.utils.ball_geometry import Point
from src.utils.green_kernel import (
    ASYMP_RATIO_BRACKET,
    EvalPolicy,
    GreenKernelParams,
    GreenPoleError,
    adaptive_gauss,
    green_g,
    green_matrix,
    leading_coefficient,
    lemma_a_bounds,
    little_g,
    little_g_quadrature,
)


def test_little_g_known_values():
    assert little_g(0.5, GreenKernelParams(1)) == pytest.approx(math.log(2.0), rel=1e-13)
    expected = 9.0 / 8.0 - 0.75 * math.log(2.0)
    assert little_g(0.5, GreenKernelParams(2)) == pytest.approx(expected, rel=1e-13)
    assert expected == pytest.approx(0.605140, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_little_g_vanishes_on_the_sphere(n):
    assert little_g(1.0, GreenKernelParams(n)) == 0.0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_little_g_is_strictly_decreasing(n):
    params = GreenKernelParams(n)
    values = [little_g(r, params) for r in np.linspace(0.01, 0.999, 300)]
    assert np.all(np.diff(values) < 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_closed_form_matches_quadrature(n):
    params = GreenKernelParams(n)
    for r in np.linspace(0.02, 0.995, 40):
        closed = little_g(float(r), params)
        oracle = little_g_quadrature(float(r), params)
        assert closed == pytest.approx(oracle, rel=1e-10)


def test_series_branch_keeps_relative_accuracy_near_sphere():
    params = GreenKernelParams(3)
    r = 1.0 - 1e-5
    gap = (1.0 - r) * (1.0 + r)
    # leading term (n+1)/(4n^2) x^n of the near-sphere expansion
    assert little_g(r, params) / gap**3 == pytest.approx(4.0 / 36.0, rel=1e-4)


def test_quadrature_policy_agrees_with_closed_form():
    closed = GreenKernelParams(2)
    quadrature = GreenKernelParams(2, EvalPolicy.ADAPTIVE_QUADRATURE)
    assert little_g(0.3, quadrature) == pytest.approx(little_g(0.3, closed), rel=1e-10)


def test_adaptive_gauss_polynomial():
    assert adaptive_gauss(lambda x: x**5, 0.0, 1.0) == pytest.approx(1.0 / 6.0, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2])
def test_pole_at_origin(n):
    with pytest.raises(GreenPoleError):
        little_g(0.0, GreenKernelParams(n))


def test_little_g_rejects_radius_outside_unit_interval():
    with pytest.raises(ValueError):
        little_g(1.5, GreenKernelParams(2))


def test_green_g_against_origin_is_little_g():
    params = GreenKernelParams(2)
    assert green_g(Point.ball(0.5, 0), Point.ball(0, 0), params) == pytest.approx(0.605140, abs=1e-6)


def test_green_g_coincident_points_is_a_pole():
    with pytest.raises(GreenPoleError):
        green_g(Point.ball(0.9, 0), Point.ball(0.9, 0), GreenKernelParams(2))


def test_green_matrix_reports_offending_atom():
    z = np.array([[0.3 + 0.2j, 0.1]])
    w = np.array([[0.1, 0.0], [0.3 + 0.2j, 0.1], [0.0, 0.5]])
    with pytest.raises(GreenPoleError) as info:
        green_matrix(z, w, GreenKernelParams(2))
    assert info.value.atom_index == 1


coordinate = st.floats(min_value=-0.45, max_value=0.45, allow_nan=False)
pairs = st.lists(coordinate, min_size=8, max_size=8).filter(
    lambda v: sum((a - b) ** 2 for a, b in zip(v[:4], v[4:])) > 1e-6
)


@given(pairs)
def test_green_g_is_symmetric(v):
    z = Point([complex(v[0], v[1]), complex(v[2], v[3])])
    w = Point([complex(v[4], v[5]), complex(v[6], v[7])])
    params = GreenKernelParams(2)
    assert green_g(z, w, params) == pytest.approx(green_g(w, z, params), rel=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lemma_a_lower_bound_holds_everywhere(n):
    params = GreenKernelParams(n)
    for r in np.concatenate([np.linspace(0.01, 0.99, 50), 1.0 - 2.0 ** -np.arange(7, 20)]):
        coords = np.zeros(n)
        coords[0] = r
        assert lemma_a_bounds(Point(coords), params).lower_ok


def test_lemma_a_upper_bound_only_near_sphere():
    params = GreenKernelParams(2)
    assert lemma_a_bounds(Point.ball(0.3, 0), params).upper_ok is None
    for r in (0.5, 0.75, 0.99, 0.99999):
        assert lemma_a_bounds(Point.ball(r, 0), params).upper_ok is True


def test_lemma_a_asymptotics_for_n_2():
    params = GreenKernelParams(2)
    lead = leading_coefficient(2)
    assert lead == pytest.approx(3.0 / 8.0)
    ratios = []
    for k in range(2, 6):
        bounds = lemma_a_bounds(Point.ball(2.0**-k, 0), params)
        assert bounds.asymp_ok is True
        ratios.append(bounds.asymp_ratio)
    assert 0.75 * lead <= min(ratios) <= max(ratios) <= lead
    assert (max(ratios) - min(ratios)) / max(ratios) < 0.25
    assert lemma_a_bounds(Point.ball(0.5, 0), params).asymp_ok is None


@pytest.mark.parametrize("n", range(2, 9))
def test_lemma_a_asymptotics_hold_in_every_dimension(n):
    params = GreenKernelParams(n)
    normalized = []
    for k in range(2, 7):
        r = 2.0**-k
        bounds = lemma_a_bounds(Point.ball(r, *([0] * (n - 1))), params)
        assert bounds.asymp_ok is True, (n, r, bounds.asymp_normalized)
        normalized.append(bounds.asymp_normalized)
    assert normalized == sorted(normalized)
    assert normalized[-1] == pytest.approx(1.0, abs=5e-3)
    assert normalized[0] >= ASYMP_RATIO_BRACKET[0]


def test_asymptotics_are_not_checked_for_n_1():
    assert lemma_a_bounds(Point.ball(0.1), GreenKernelParams(1)).asymp_ok is None
    assert lemma_a_bounds(Point.ball(0.1), GreenKernelParams(1)).asymp_normalized is None
    with pytest.raises(ValueError):
        leading_coefficient(1)


def test_params_validation():
    with pytest.raises(ValueError):
        GreenKernelParams(0)
    with pytest.raises(ValueError):
        GreenKernelParams(2, quadrature_tol=0.5)
