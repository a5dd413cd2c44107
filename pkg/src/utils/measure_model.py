"""
Nonnegative measures on the ball: finite atom lists plus radial densities
amplitude * (1 - |w|)^alpha against (unnormalized) volume measure on B.

Radial parts are handled by one-dimensional reductions in the radius; with
dV = |S^{2n-1}| t^{2n-1} dt dsigma every radial integral becomes a weighted integral
in s = 1 - t, which scipy evaluates with the algebraic endpoint weight.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import comb

from src.config.config_validator import validate_unit_interval
from src.utils.ball_geometry import (
    Point,
    carleson_gap_batch,
    norm_sq_batch,
    random_sphere_points,
)
from src.utils.green_kernel import little_g_reduced
from src.utils.streams import StreamId, stream_generator

_QUAD_OPTIONS = dict(epsabs=0.0, epsrel=1e-10, limit=400)


def sphere_area(n: int) -> float:
    """
    Surface area 2 pi^n / (n-1)! of the unit sphere of C^n = R^{2n}.
    """
    return 2.0 * math.pi**n / math.factorial(n - 1)


@dataclass(frozen=True)
class Atom:
    location: Point
    mass: float

    def __post_init__(self):
        if not math.isfinite(self.mass) or self.mass <= 0:
            raise ValueError(f"Invalid atom mass={self.mass}. Must be finite and > 0")
        if self.location.on_sphere or self.location.norm >= 1.0:
            raise ValueError(f"Atom location {self.location} must lie strictly inside B")


@dataclass(frozen=True)
class RadialDensity:
    """
    amplitude * (1 - |w|)^alpha on inner_cutoff <= |w| < 1, zero inside the cutoff.
    """

    alpha: float
    amplitude: float = 1.0
    inner_cutoff: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValueError(f"Invalid density exponent alpha={self.alpha}")
        if not math.isfinite(self.amplitude) or self.amplitude <= 0:
            raise ValueError(f"Invalid density amplitude={self.amplitude}. Must be > 0")
        if not 0.0 <= self.inner_cutoff < 1.0:
            raise ValueError(f"Invalid inner_cutoff={self.inner_cutoff}. Must be in [0, 1)")

    def exponent(self, n: int, weighted: bool) -> float:
        return self.alpha + n if weighted else self.alpha


@dataclass(frozen=True)
class Measure:
    n: int
    atoms: Tuple[Atom, ...] = ()
    densities: Tuple[RadialDensity, ...] = ()

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"Invalid dimension n={self.n}. Must be an integer >= 1")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "densities", tuple(self.densities))
        for index, atom in enumerate(self.atoms):
            if atom.location.n != self.n:
                raise ValueError(f"Atom {index} has dimension {atom.location.n}, expected {self.n}")
        for index, density in enumerate(self.densities):
            if self.n + density.alpha <= -1:
                raise ValueError(
                    f"Density {index} has alpha={density.alpha}; n + alpha > -1 is needed "
                    "for the convergence integral to be finite"
                )

    @property
    def is_zero(self) -> bool:
        return not self.atoms and not self.densities

    @property
    def atom_locations(self) -> np.ndarray:
        if not self.atoms:
            return np.zeros((0, self.n), dtype=np.complex128)
        return np.stack([atom.location.coords for atom in self.atoms])

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([atom.mass for atom in self.atoms], dtype=float)

    @property
    def origin_atoms(self) -> np.ndarray:
        """
        Boolean mask of the atoms sitting at the origin (the rotation-invariant atoms).
        """
        return norm_sq_batch(self.atom_locations) == 0.0

    @property
    def is_radial(self) -> bool:
        return bool(np.all(self.origin_atoms))

    def weighted(self) -> "WeightedMeasure":
        """
        The boundary-weighted measure lambda = (1 - |w|)^n mu.
        """
        return WeightedMeasure(self)


@dataclass(frozen=True)
class WeightedMeasure:
    """
    d lambda = (1 - |z|)^n d mu.
    """

    base: Measure

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def atom_locations(self) -> np.ndarray:
        return self.base.atom_locations

    @property
    def atom_masses(self) -> np.ndarray:
        norms = np.sqrt(norm_sq_batch(self.base.atom_locations))
        return self.base.atom_masses * (1.0 - norms) ** self.n


@dataclass(frozen=True)
class BoundaryMeasure:
    """
    Finite atomic measure on the sphere S.
    """

    n: int
    points: np.ndarray
    masses: np.ndarray = field(default=None)

    def __post_init__(self):
        points = np.array(self.points, dtype=np.complex128).reshape(-1, self.n)
        masses = (
            np.ones(len(points)) if self.masses is None else np.array(self.masses, dtype=float)
        )
        if masses.shape != (len(points),):
            raise ValueError(f"Got {len(masses)} masses for {len(points)} atoms")
        if np.any(~np.isfinite(masses)) or np.any(masses <= 0):
            raise ValueError("Boundary atom masses must be finite and > 0")
        norms = np.sqrt(norm_sq_batch(points))
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("Boundary atoms must lie on the unit sphere")
        points.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.masses))


MassSource = Union[Measure, WeightedMeasure]


def _power_moment(a: float, n: int, s_lo: float, s_hi: float) -> float:
    """
    int_{s_lo}^{s_hi} (1-s)^{2n-1} s^a ds by the binomial expansion of (1-s)^{2n-1}.
    """
    if s_hi <= s_lo:
        return 0.0
    total = 0.0
    for k in range(2 * n):
        b = a + k + 1.0
        if b == 0.0:
            if s_lo == 0.0:
                return math.inf
            term = math.log(s_hi / s_lo)
        elif b < 0.0 and s_lo == 0.0:
            return math.inf
        else:
            term = (s_hi**b - s_lo**b) / b
        total += comb(2 * n - 1, k, exact=True) * (-1.0) ** k * term
    return max(total, 0.0)


def density_mass(
    density: RadialDensity, n: int, lo: float, hi: float, weighted: bool = False
) -> float:
    """
    Mass of the shell lo <= |w| <= hi under the density (or its lambda-weighting).
    """
    lo = max(lo, density.inner_cutoff)
    if hi <= lo:
        return 0.0
    a = density.exponent(n, weighted)
    return density.amplitude * sphere_area(n) * _power_moment(a, n, 1.0 - hi, 1.0 - lo)


def ball_mass(mu: Measure, r: float) -> float:
    """
    mu of the closed ball of radius r.
    """
    norms = np.sqrt(norm_sq_batch(mu.atom_locations))
    total = float(np.sum(mu.atom_masses[norms <= r]))
    for density in mu.densities:
        total += density_mass(density, mu.n, 0.0, r)
    return total


def _alg_quad(f: Callable[[float], float], lo: float, exponent: float) -> float:
    """
    int_lo^1 f(t) (1-t)^exponent dt.
    """
    if lo >= 1.0:
        return 0.0
    value, _ = quad(f, lo, 1.0, weight="alg", wvar=(0.0, exponent), **_QUAD_OPTIONS)
    return value


def density_green_tail(density: RadialDensity, n: int, r: float) -> float:
    """
    int_{|w| > r} g(|w|) d mu_density(w).
    """
    lo = max(r, density.inner_cutoff)

    def integrand(t: float) -> float:
        if t <= 0.0:
            return 0.0
        return float(little_g_reduced(np.array([t]), n)[0]) * t ** (2 * n - 1)

    return density.amplitude * sphere_area(n) * _alg_quad(integrand, lo, density.alpha + n)


def convergence_integral(mu: Measure) -> float:
    """
    int_B (1 - |w|^2)^n d mu(w).
    """
    n = mu.n
    norms_sq = norm_sq_batch(mu.atom_locations)
    total = float(np.sum(mu.atom_masses * (1.0 - norms_sq) ** n))
    for density in mu.densities:
        total += (
            density.amplitude
            * sphere_area(n)
            * _alg_quad(lambda t: (1.0 + t) ** n * t ** (2 * n - 1), density.inner_cutoff, density.alpha + n)
        )
    return total


@lru_cache(maxsize=4096)
def cap_measure(t: float, eps: float, n: int) -> float:
    """
    sigma{eta in S : |1 - t <eta, xi>| < eps}, independent of xi.

    For n >= 2, zeta = <eta, xi> has density (n-1)/pi (1-|zeta|^2)^{n-2} on the unit disc;
    for n = 1 it is uniform on the circle. In polar coordinates the condition is an arc
    cos(theta) > kappa(rho) with 1 - kappa = (eps^2 - (1 - t rho)^2) / (2 t rho).
    """
    if not 0.0 < t <= 1.0 or eps <= 0.0:
        raise ValueError(f"cap_measure needs 0 < t <= 1 and eps > 0, got t={t}, eps={eps}")
    u = 1.0 - t

    def arc_fraction(v: float) -> float:
        rho = 1.0 - v
        gap = u + v - u * v
        one_minus_kappa = (eps * eps - gap * gap) / (2.0 * t * rho)
        half = min(max(0.5 * one_minus_kappa, 0.0), 1.0)
        return 2.0 * math.asin(math.sqrt(half)) / math.pi

    if n == 1:
        return arc_fraction(0.0)
    rho_lo = max(0.0, (1.0 - eps) / t)
    if rho_lo >= 1.0:
        return 0.0
    v_max = 1.0 - rho_lo

    def integrand(v: float) -> float:
        rho = 1.0 - v
        return 2.0 * (n - 1) * rho * (v * (2.0 - v)) ** (n - 2) * arc_fraction(v)

    value, _ = quad(integrand, 0.0, v_max, epsabs=0.0, epsrel=1e-10, limit=400)
    return min(max(value, 0.0), 1.0)


@lru_cache(maxsize=1024)
def _density_carleson_mass(n: int, alpha: float, cutoff: float, delta: float, weighted: bool) -> float:
    a = alpha + n if weighted else alpha
    u_max = min(delta, 1.0 - cutoff)
    if a <= -1.0:
        return math.inf

    def integrand(u: float) -> float:
        return (1.0 - u) ** (2 * n - 1) * cap_measure(1.0 - u, delta, n)

    value, _ = quad(integrand, 0.0, u_max, weight="alg", wvar=(a, 0.0), epsabs=0.0, epsrel=1e-8, limit=400)
    return sphere_area(n) * value


def carleson_mass(nu: MassSource, xi: Point, delta: float) -> float:
    """
    nu(C(xi, delta)) with C(xi, delta) = {w in B : |1 - <w, xi>| < delta}.

    Atoms are tested exactly; radial densities use the sector reduction, which makes
    their contribution independent of xi.
    """
    if not xi.on_sphere:
        raise ValueError("carleson_mass needs xi on the unit sphere")
    validate_unit_interval("delta", delta)
    if xi.n != nu.n:
        raise ValueError(f"Dimension mismatch : xi={xi.n}, measure={nu.n}")
    weighted = isinstance(nu, WeightedMeasure)
    base = nu.base if weighted else nu
    inside = carleson_gap_batch(nu.atom_locations, xi.coords) < delta
    total = float(np.sum(nu.atom_masses[inside]))
    for density in base.densities:
        total += density.amplitude * _density_carleson_mass(
            base.n, float(density.alpha), float(density.inner_cutoff), float(delta), weighted
        )
    return total


def density_carleson_mass(nu: MassSource, delta: float) -> float:
    """
    The xi-independent density part of carleson_mass.
    """
    weighted = isinstance(nu, WeightedMeasure)
    base = nu.base if weighted else nu
    return sum(
        d.amplitude * _density_carleson_mass(base.n, float(d.alpha), float(d.inner_cutoff), float(delta), weighted)
        for d in base.densities
    )


@dataclass(frozen=True)
class MeasureSample:
    """
    Weighted points whose weighted sums estimate mu-integrals without bias.
    """

    points: np.ndarray
    weights: np.ndarray
    from_atoms: np.ndarray

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> Tuple[float, float]:
        """
        Estimate of int f dmu and its standard error (atoms contribute no variance).
        """
        values = f(self.points) * self.weights
        exact = float(np.sum(values[self.from_atoms]))
        sampled = values[~self.from_atoms]
        if sampled.size == 0:
            return exact, 0.0
        scaled = sampled * sampled.size
        std_error = float(np.std(scaled, ddof=1) / np.sqrt(sampled.size)) if sampled.size > 1 else 0.0
        return exact + float(np.sum(sampled)), std_error


def _proposal_exponent(density: RadialDensity, n: int) -> float:
    return density.alpha if density.alpha > -1.0 else density.alpha + n


def sample_from_measure(mu: Measure, seed: int, count: int, *keys: int) -> MeasureSample:
    """
    Atoms verbatim; each density sampled with count points, depth s = 1 - |w| drawn
    proportional to s^kappa (kappa = alpha, or alpha + n when alpha <= -1) and
    directions uniform on S.
    """
    if count < 1:
        raise ValueError(f"Invalid count={count}. Must be >= 1")
    n = mu.n
    points = [mu.atom_locations]
    weights = [mu.atom_masses]
    flags = [np.ones(len(mu.atoms), dtype=bool)]
    for index, density in enumerate(mu.densities):
        rng = stream_generator(seed, StreamId.SAMPLE_MEASURE, index, *keys)
        kappa = _proposal_exponent(density, n)
        depth = 1.0 - density.inner_cutoff
        s = depth * rng.random(count) ** (1.0 / (kappa + 1.0))
        t = 1.0 - s
        normalizer = depth ** (kappa + 1.0) / (kappa + 1.0)
        with np.errstate(divide="ignore"):
            w = density.amplitude * sphere_area(n) * t ** (2 * n - 1) * s ** (density.alpha - kappa)
        points.append(random_sphere_points(rng, count, n) * t[:, None])
        weights.append(w * normalizer / count)
        flags.append(np.zeros(count, dtype=bool))
    return MeasureSample(
        points=np.concatenate(points),
        weights=np.concatenate(weights),
        from_atoms=np.concatenate(flags),
    )


# Built-in measures


SHELL_COUNT = 12
SHELL_DIRECTIONS = 8


def shell_radius(k: int) -> float:
    """
    Radius of shell k; 1 - 1.5 * 2^{-k} stays off the dyadic grid 1 - 2^{-j}.
    """
    return 1.0 - 1.5 * 2.0 ** (-k)


def atom_at_origin(n: int = 2, mass: float = 1.0) -> Measure:
    """
    A single atom at the origin, whose potential is mass * g(|z|).
    """
    return Measure(n, atoms=(Atom(Point(np.zeros(n)), mass),))


def lebesgue_measure(n: int = 2) -> Measure:
    """
    Lebesgue measure on B (density 1, no cutoff).
    """
    return Measure(n, densities=(RadialDensity(alpha=0.0),))


def radial_gamma_measure(gamma: float, n: int = 2) -> Measure:
    """
    Radial density with Carleson exponent gamma, alpha = gamma - 2n - 1.
    """
    return Measure(n, densities=(RadialDensity(alpha=gamma - 2 * n - 1),))


def shell_atomic_measure(n: int = 2, seed: int = 0) -> Measure:
    """
    Unit atoms in SHELL_DIRECTIONS seeded directions on each of SHELL_COUNT dyadic shells.
    """
    rng = stream_generator(seed, StreamId.MEASURE_BUILD, n)
    atoms = []
    for k in range(1, SHELL_COUNT + 1):
        directions = random_sphere_points(rng, SHELL_DIRECTIONS, n)
        atoms.extend(Atom(Point(shell_radius(k) * d), 1.0) for d in directions)
    return Measure(n, atoms=tuple(atoms))


def finite_density_measure(n: int = 2) -> Measure:
    return Measure(n, densities=(RadialDensity(alpha=-0.5),))


BUILTIN_MEASURES: Dict[str, Callable[[int, int], Measure]] = {
    "atom-origin": lambda n, seed: atom_at_origin(n),
    "lebesgue": lambda n, seed: lebesgue_measure(n),
    "radial-gamma2.5": lambda n, seed: radial_gamma_measure(2.5, n),
    "radial-gamma3.5": lambda n, seed: radial_gamma_measure(3.5, n),
    "shell-atomic": shell_atomic_measure,
    "finite-density": lambda n, seed: finite_density_measure(n),
}


def boundary_test_measures(n: int = 2, seed: int = 0) -> Dict[str, BoundaryMeasure]:
    """
    Three seeded atomic measures on S: scattered atoms, a cluster near e1, a single atom.
    """
    rng = stream_generator(seed, StreamId.MEASURE_BUILD, n, 1)
    e1 = np.zeros(n, dtype=np.complex128)
    e1[0] = 1.0
    scattered = random_sphere_points(rng, 16, n)
    cluster = e1 + 0.05 * (rng.standard_normal((12, n)) + 1j * rng.standard_normal((12, n)))
    cluster /= np.linalg.norm(cluster, axis=1, keepdims=True)
    return {
        "scattered": BoundaryMeasure(n, scattered, np.ones(16)),
        "cluster": BoundaryMeasure(n, cluster, 0.5 + rng.random(12)),
        "single": BoundaryMeasure(n, e1[None, :], np.array([2.0])),
    }
