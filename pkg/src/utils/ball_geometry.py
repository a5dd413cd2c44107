"""
Linear algebra on the unit ball B of C^n: inner products, the involutive
automorphisms phi_w, the anisotropic boundary metric and the regions built on it.

Points are complex128 arrays; the batched helpers accept any leading shape and
broadcast over it, the Point-level functions validate their arguments.
"""

from enum import Enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

SPHERE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Point:
    """
    A point of the closed unit ball (or of the unit sphere when on_sphere is set).
    """

    coords: np.ndarray
    on_sphere: bool = False

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.complex128).reshape(-1)
        if coords.size < 1:
            raise ValueError("Point needs at least one complex coordinate")
        if not np.all(np.isfinite(coords)):
            raise ValueError(f"Point coordinates must be finite : {coords}")
        norm = float(np.linalg.norm(coords))
        if self.on_sphere and abs(norm - 1.0) > SPHERE_TOL:
            raise ValueError(f"Sphere point has norm {norm!r}, expected 1")
        if not self.on_sphere and norm > 1.0:
            raise ValueError(f"Ball point has norm {norm!r} > 1")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @classmethod
    def ball(cls, *coords: complex) -> "Point":
        return cls(np.asarray(coords, dtype=np.complex128))

    @classmethod
    def sphere(cls, *coords: complex) -> "Point":
        return cls(np.asarray(coords, dtype=np.complex128), on_sphere=True)

    @property
    def n(self) -> int:
        return int(self.coords.size)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.coords) ** 2))

    def __repr__(self) -> str:
        kind = "sphere" if self.on_sphere else "ball"
        return f"Point.{kind}{tuple(complex(c) for c in self.coords)}"


def _check_dimensions(*points: Point) -> int:
    dims = {p.n for p in points}
    if len(dims) != 1:
        raise ValueError(f"Dimension mismatch : {sorted(dims)}")
    return dims.pop()


# Batched kernels


def inner_batch(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """
    <z, w> = sum_j z_j conj(w_j) over the last axis.
    """
    return np.sum(z * np.conj(w), axis=-1)


def norm_sq_batch(z: np.ndarray) -> np.ndarray:
    """
    Row-wise |z|^2 without forming complex products.
    """
    return np.sum(z.real**2 + z.imag**2, axis=-1)


def mobius_batch(w: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    phi_w(z) = (w - P_w z - (1-|w|^2)^{1/2} Q_w z) / (1 - <z,w>), with P_0 = 0.
    """
    w = np.asarray(w, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    ip = np.asarray(inner_batch(z, w))
    w_sq = np.asarray(norm_sq_batch(w))
    nonzero = w_sq > 0
    scale = np.asarray(np.where(nonzero, ip / np.where(nonzero, w_sq, 1.0), 0.0))
    proj = scale[..., None] * w
    s = np.asarray(np.sqrt((1.0 - np.sqrt(w_sq)) * (1.0 + np.sqrt(w_sq))))
    return (w - proj - s[..., None] * (z - proj)) / (1.0 - ip)[..., None]


def wedge_sq_batch(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """
    |z|^2 |w|^2 - |<z,w>|^2 as the Lagrange sum over i<j of |z_i w_j - z_j w_i|^2.
    """
    n = z.shape[-1]
    total = np.zeros(np.broadcast_shapes(z.shape[:-1], w.shape[:-1]))
    for i in range(n):
        for j in range(i + 1, n):
            total = total + np.abs(z[..., i] * w[..., j] - z[..., j] * w[..., i]) ** 2
    return total


def mobius_modulus_sq_batch(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """
    |phi_w(z)|^2 = (|z-w|^2 - (|z|^2|w|^2 - |<z,w>|^2)) / |1-<z,w>|^2, accurate near z = w.
    """
    diff_sq = norm_sq_batch(z - w)
    num = np.maximum(diff_sq - wedge_sq_batch(z, w), 0.0)
    return num / np.abs(1.0 - inner_batch(z, w)) ** 2


def mobius_gap_batch(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """
    1 - |phi_w(z)|^2 = (1-|z|^2)(1-|w|^2) / |1-<z,w>|^2, accurate near the sphere.
    """
    z_norm = np.sqrt(norm_sq_batch(z))
    w_norm = np.sqrt(norm_sq_batch(w))
    num = (1.0 - z_norm) * (1.0 + z_norm) * (1.0 - w_norm) * (1.0 + w_norm)
    return num / np.abs(1.0 - inner_batch(z, w)) ** 2


def carleson_gap_batch(z: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """
    |1 - <z, xi>|, the squared anisotropic distance.
    """
    return np.abs(1.0 - inner_batch(z, xi))


def random_sphere_points(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    """
    Uniform points of S in C^n from normalized 2n-dimensional Gaussian draws.
    """
    draws = rng.standard_normal((count, 2 * n))
    draws /= np.linalg.norm(draws, axis=1, keepdims=True)
    return draws[:, :n] + 1j * draws[:, n:]


def random_ball_points(
    rng: np.random.Generator, count: int, n: int, radius: float = 1.0
) -> np.ndarray:
    """
    Uniform points of the ball of the given radius (volume measure on R^{2n}).
    """
    directions = random_sphere_points(rng, count, n)
    radii = radius * rng.random(count) ** (1.0 / (2 * n))
    return directions * radii[:, None]


# Point-level operations


def inner(z: Point, w: Point) -> complex:
    """
    Hermitian product <z, w> = sum z_k conj(w_k).
    """
    _check_dimensions(z, w)
    return complex(inner_batch(z.coords, w.coords))


def mobius(w: Point, z: Point) -> Point:
    """
    Involutive automorphism phi_w applied to z; both arguments must lie in the open ball.
    """
    _check_dimensions(w, z)
    for name, point in (("w", w), ("z", z)):
        if point.norm >= 1.0:
            raise ValueError(f"mobius needs |{name}| < 1, got {point.norm!r}")
    image = mobius_batch(w.coords, z.coords)
    norm = float(np.linalg.norm(image))
    if norm > 1.0:
        # rounding only, phi_w maps B onto B
        image = image / norm
    return Point(image)


def aniso_dist(a: Point, b: Point) -> float:
    """
    d(a, b) = |1 - <a, b>|^{1/2}.
    """
    _check_dimensions(a, b)
    return float(np.sqrt(carleson_gap_batch(a.coords, b.coords)))


class RegionKind(Enum):
    """
    Regions used by the growth theorems and their proofs.
    """

    CARLESON = "carleson"
    METRIC_BALL = "metric_ball"
    INVARIANT_BALL = "invariant_ball"
    PROOF_BOX = "proof_box"


@dataclass(frozen=True)
class Region:
    """
    C(xi, delta), D(xi, delta), B*(z, rho) or K(z, sigma1, sigma2).
    """

    kind: RegionKind
    center: Point
    params: Tuple[float, ...]

    def __post_init__(self):
        expected = 2 if self.kind == RegionKind.PROOF_BOX else 1
        if len(self.params) != expected or any(p < 0 for p in self.params):
            raise ValueError(
                f"Region {self.kind.value} needs {expected} nonnegative parameter(s), got {self.params}"
            )
        if self.kind == RegionKind.CARLESON and not self.center.on_sphere:
            raise ValueError("Carleson regions are centred on the sphere")
        if self.kind in (RegionKind.INVARIANT_BALL, RegionKind.PROOF_BOX):
            norm = self.center.norm
            if norm >= 1.0 or (self.kind == RegionKind.PROOF_BOX and norm == 0.0):
                raise ValueError(f"Region {self.kind.value} needs a centre with 0 < |z| < 1")

    @classmethod
    def carleson(cls, xi: Point, delta: float) -> "Region":
        return cls(RegionKind.CARLESON, xi, (float(delta),))

    @classmethod
    def metric_ball(cls, xi: Point, delta: float) -> "Region":
        return cls(RegionKind.METRIC_BALL, xi, (float(delta),))

    @classmethod
    def invariant_ball(cls, z: Point, rho: float) -> "Region":
        return cls(RegionKind.INVARIANT_BALL, z, (float(rho),))

    @classmethod
    def proof_box(cls, z: Point, sigma1: float, sigma2: float) -> "Region":
        return cls(RegionKind.PROOF_BOX, z, (float(sigma1), float(sigma2)))


def proof_box_contains(
    center: np.ndarray, w: np.ndarray, sigma1: np.ndarray, sigma2: np.ndarray
) -> np.ndarray:
    """
    Batched membership in K(z, sigma1, sigma2) = {w : |r - |w|| <= sigma1, d(xi, eta) <= sigma2}.
    """
    r = np.sqrt(norm_sq_batch(center))
    w_norm = np.sqrt(norm_sq_batch(w))
    xi = center / r[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        eta = w / w_norm[..., None]
    dist = np.sqrt(carleson_gap_batch(xi, eta))
    return (w_norm > 0) & (np.abs(r - w_norm) <= sigma1) & (dist <= sigma2)


def in_region(z: Point, region: Region) -> bool:
    """
    Exact membership; strict comparisons for C, D and B*, non-strict for K.
    """
    _check_dimensions(z, region.center)
    kind = region.kind
    if kind == RegionKind.CARLESON:
        (delta,) = region.params
        return bool(carleson_gap_batch(z.coords, region.center.coords) < delta)
    if kind == RegionKind.METRIC_BALL:
        (delta,) = region.params
        return aniso_dist(z, region.center) < delta
    if kind == RegionKind.INVARIANT_BALL:
        (rho,) = region.params
        if z.norm >= 1.0:
            return False
        modulus = np.sqrt(mobius_modulus_sq_batch(region.center.coords, z.coords))
        return bool(modulus < rho)
    sigma1, sigma2 = region.params
    return bool(proof_box_contains(region.center.coords, z.coords, sigma1, sigma2))


@dataclass(frozen=True)
class IdentityResiduals:
    """
    Worst residuals of the automorphism identities over a batch of random pairs.
    """

    n: int
    trials: int
    involution: float
    modulus: float
    symmetry: float
    triangle: float = 0.0

    def passed(self, tol: float = 1e-10) -> bool:
        return max(self.involution, self.modulus, self.symmetry) < tol and self.triangle <= 1e-12


def identity_residuals(
    rng: np.random.Generator, n: int, trials: int, radius: float = 0.9
) -> IdentityResiduals:
    """
    Involution, modulus identity and |phi_w(z)| = |phi_z(w)| on random pairs of B(0, radius);
    triangle is the worst excess d(a, b) - d(a, c) - d(c, b) over random sphere triples.
    """
    w = random_ball_points(rng, trials, n, radius)
    z = random_ball_points(rng, trials, n, radius)
    phi = mobius_batch(w, z)
    back = mobius_batch(w, phi)
    involution = float(np.max(np.linalg.norm(back - z, axis=-1)))

    lhs = (1.0 - norm_sq_batch(phi)) * np.abs(1.0 - inner_batch(z, w)) ** 2
    rhs = (1.0 - norm_sq_batch(z)) * (1.0 - norm_sq_batch(w))
    modulus = float(np.max(np.abs(lhs - rhs) / rhs))

    swapped = mobius_batch(z, w)
    symmetry = float(
        np.max(np.abs(np.linalg.norm(phi, axis=-1) - np.linalg.norm(swapped, axis=-1)))
    )

    a, b, c = (random_sphere_points(rng, trials, n) for _ in range(3))

    def dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.sqrt(np.abs(1.0 - inner_batch(x, y)))

    triangle = float(max(np.max(dist(a, b) - dist(a, c) - dist(c, b)), 0.0))
    return IdentityResiduals(n, trials, involution, modulus, symmetry, triangle)


@dataclass(frozen=True)
class InclusionResult:
    """
    Outcome of random trials of B*(z, 1/4) being contained in K(z, c1(1-r), c2(1-r)^{1/2}).
    """

    n: int
    trials: int
    counterexamples: int
    c1: float
    c2: float


INCLUSION_C1 = 2.0 / 3.0
INCLUSION_C2 = 4.0 * np.sqrt(2.0)


def inclusion_trials(
    rng: np.random.Generator,
    n: int,
    trials: int,
    c1: float = INCLUSION_C1,
    c2: float = INCLUSION_C2,
) -> InclusionResult:
    """
    Samples z with 1/2 < |z| < 1 and w = phi_z(u), |u| < 1/4, so |phi_w(z)| = |u| < 1/4.
    """
    directions = random_sphere_points(rng, trials, n)
    r = 0.5 + 0.5 * rng.random(trials)
    r = np.where(r <= 0.5, np.nextafter(0.5, 1.0), r)
    z = directions * r[:, None]
    u = random_ball_points(rng, trials, n, radius=0.25)
    w = mobius_batch(z, u)
    in_invariant_ball = np.sqrt(mobius_modulus_sq_batch(z, w)) < 0.25
    s = 1.0 - r
    inside = proof_box_contains(z, w, c1 * s, c2 * np.sqrt(s))
    counterexamples = int(np.count_nonzero(in_invariant_ball & ~inside))
    return InclusionResult(n, trials, counterexamples, float(c1), float(c2))
