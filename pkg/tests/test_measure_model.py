import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.utils.ball_geometry import Point, random_sphere_points
from src.utils.measure_model import (
    BUILTIN_MEASURES,
    SHELL_COUNT,
    SHELL_DIRECTIONS,
    Atom,
    BoundaryMeasure,
    Measure,
    RadialDensity,
    ball_mass,
    boundary_test_measures,
    cap_measure,
    carleson_mass,
    convergence_integral,
    density_carleson_mass,
    lebesgue_measure,
    radial_gamma_measure,
    sample_from_measure,
    shell_atomic_measure,
    shell_radius,
    sphere_area,
)
from src.utils.smoothness_functional import fit_exponent

from tests.conftest import e1


def single_atom(r: float = 0.9, mass: float = 1.0) -> Measure:
    return Measure(2, atoms=(Atom(Point.ball(r, 0), mass),))


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(2 * math.pi**2)


def test_atom_validation():
    with pytest.raises(ValueError):
        Atom(Point.ball(0.5, 0), 0.0)
    with pytest.raises(ValueError):
        Atom(Point.sphere(1, 0), 1.0)


def test_measure_rejects_divergent_density():
    with pytest.raises(ValueError, match="convergence integral"):
        Measure(2, densities=(RadialDensity(alpha=-3.5),))


def test_measure_rejects_atom_of_wrong_dimension():
    with pytest.raises(ValueError, match="dimension"):
        Measure(2, atoms=(Atom(Point.ball(0.5), 1.0),))


def test_lebesgue_masses():
    mu = lebesgue_measure(2)
    assert ball_mass(mu, 1.0) == pytest.approx(math.pi**2 / 2, rel=1e-9)
    assert ball_mass(mu, 0.5) == pytest.approx(math.pi**2 / 2 * 0.5**4, rel=1e-9)


def test_convergence_integral():
    assert convergence_integral(lebesgue_measure(2)) == pytest.approx(math.pi**2 / 12, rel=1e-8)
    assert convergence_integral(single_atom(0.5, 2.0)) == pytest.approx(2.0 * 0.75**2)


def test_carleson_mass_of_an_atom():
    mu = single_atom()
    xi = Point.sphere(1, 0)
    assert carleson_mass(mu.weighted(), xi, 0.2) == pytest.approx(0.01)
    assert carleson_mass(mu.weighted(), xi, 0.05) == 0.0
    assert carleson_mass(mu, xi, 0.2) == 1.0


def test_carleson_mass_validates_arguments():
    mu = single_atom()
    with pytest.raises(ValueError, match="sphere"):
        carleson_mass(mu, Point.ball(0.5, 0), 0.1)
    with pytest.raises(ValueError):
        carleson_mass(mu, Point.sphere(1, 0), 1.5)


def test_cap_measure_on_the_circle():
    assert cap_measure(1.0, 0.5, 1) == pytest.approx(2 * math.asin(0.25) / math.pi, rel=1e-12)


def test_cap_measure_against_hit_counting():
    rng = np.random.default_rng(3)
    xi = random_sphere_points(rng, 200_000, 2)
    hits = np.abs(1.0 - 0.9 * xi[:, 0]) < 0.2
    fraction = hits.mean()
    se = math.sqrt(fraction * (1 - fraction) / hits.size)
    assert cap_measure(0.9, 0.2, 2) == pytest.approx(fraction, abs=4 * se)


def test_cap_measure_empty_when_out_of_reach():
    assert cap_measure(0.5, 0.2, 2) == 0.0


def test_density_carleson_mass_is_direction_independent():
    mu = lebesgue_measure(2)
    rng = np.random.default_rng(4)
    reference = density_carleson_mass(mu.weighted(), 0.1)
    for coords in random_sphere_points(rng, 3, 2):
        assert carleson_mass(mu.weighted(), Point(coords, on_sphere=True), 0.1) == pytest.approx(reference)


def test_unweighted_carleson_mass_can_diverge():
    mu = Measure(2, densities=(RadialDensity(alpha=-1.5),))
    assert math.isinf(density_carleson_mass(mu, 0.1))
    assert math.isfinite(density_carleson_mass(mu.weighted(), 0.1))


def test_radial_gamma_exponent():
    mu = radial_gamma_measure(3.5, 2)
    assert mu.densities[0].alpha == pytest.approx(3.5 - 5)


def test_sample_from_measure_estimates_total_mass():
    mu = Measure(2, atoms=(Atom(Point.ball(0.5, 0), 2.0),), densities=(RadialDensity(alpha=0.0),))
    sample = sample_from_measure(mu, seed=11, count=20_000)
    estimate, std_error = sample.integrate(lambda w: np.ones(len(w)))
    assert estimate == pytest.approx(2.0 + math.pi**2 / 2, abs=4 * std_error + 1e-12)
    assert sample.from_atoms.sum() == 1


def test_sample_from_measure_is_seeded():
    mu = lebesgue_measure(2)
    a = sample_from_measure(mu, seed=5, count=100)
    b = sample_from_measure(mu, seed=5, count=100)
    c = sample_from_measure(mu, seed=6, count=100)
    np.testing.assert_array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)


def test_shell_atomic_measure():
    mu = shell_atomic_measure(2, seed=1)
    assert len(mu.atoms) == SHELL_COUNT * SHELL_DIRECTIONS
    radii = np.sqrt(np.sum(np.abs(mu.atom_locations) ** 2, axis=1))
    expected = np.repeat([shell_radius(k) for k in range(1, SHELL_COUNT + 1)], SHELL_DIRECTIONS)
    np.testing.assert_allclose(radii, expected, rtol=1e-12)
    assert not mu.is_radial
    np.testing.assert_array_equal(shell_atomic_measure(2, 1).atom_locations, mu.atom_locations)


def test_builtin_catalog():
    assert set(BUILTIN_MEASURES) == {
        "atom-origin",
        "lebesgue",
        "radial-gamma2.5",
        "radial-gamma3.5",
        "shell-atomic",
        "finite-density",
    }
    origin = BUILTIN_MEASURES["atom-origin"](3, 0)
    assert origin.n == 3 and origin.is_radial


def test_boundary_measures():
    measures = boundary_test_measures(2, seed=0)
    assert set(measures) == {"scattered", "cluster", "single"}
    for nu in measures.values():
        np.testing.assert_allclose(np.linalg.norm(nu.points, axis=1), 1.0, atol=1e-12)
    assert measures["single"].total_mass == 2.0


def test_boundary_measure_rejects_interior_points():
    with pytest.raises(ValueError, match="sphere"):
        BoundaryMeasure(2, [e1(2, 0.5)])


@given(
    st.floats(min_value=0.0, max_value=2 * math.pi),
    st.floats(min_value=0.0, max_value=2 * math.pi),
    st.floats(min_value=0.05, max_value=1.5),
)
def test_carleson_mass_is_monotone_and_weighting_only_shrinks(theta, phi, split):
    mu = Measure(
        2,
        atoms=shell_atomic_measure(2, seed=5).atoms,
        densities=(RadialDensity(alpha=0.0, amplitude=0.5),),
    )
    xi = Point.sphere(math.cos(split) * np.exp(1j * theta), math.sin(split) * np.exp(1j * phi))
    deltas = 2.0 ** -np.arange(1, 12)
    weighted = [carleson_mass(mu.weighted(), xi, d) for d in deltas]
    plain = [carleson_mass(mu, xi, d) for d in deltas]
    assert all(a >= b for a, b in zip(weighted, weighted[1:]))
    assert all(a >= b for a, b in zip(plain, plain[1:]))
    assert all(w <= m * (1.0 + 1e-12) for w, m in zip(weighted, plain))


@pytest.mark.parametrize("gamma", [2.5, 3.0, 3.5])
def test_radial_family_carleson_exponent(gamma):
    mu = radial_gamma_measure(gamma, 2).weighted()
    points = [(2.0**-k, density_carleson_mass(mu, 2.0**-k)) for k in range(4, 14)]
    assert fit_exponent(points).slope == pytest.approx(gamma, abs=0.25)
