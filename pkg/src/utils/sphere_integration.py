"""
Integration over the unit sphere S of C^n against normalized surface measure, Green
potentials G_mu and their p-th means m_p(r, G_mu).

Sphere integrals of peaked integrands are estimated with a defensive mixture: uniform
sigma plus uniform-on-cap components around the directions where the integrand
concentrates. The mixture density with respect to sigma is exact, so the weighted
averages are unbiased for any choice of caps.
"""

import math
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

import numpy as np

from src.config.config_validator import validate_p_range, validate_unit_interval
from src.config.logger import logger
from src.utils.ball_geometry import (
    Point,
    inner_batch,
    norm_sq_batch,
    random_sphere_points,
)
from src.utils.green_kernel import GreenKernelParams, GreenPoleError, green_matrix, little_g
from src.utils.measure_model import (
    Measure,
    carleson_mass,
    cap_measure,
    density_green_tail,
    density_mass,
    sample_from_measure,
)
from src.utils.streams import CHUNK_SIZE, StreamId, chunk_sizes, stream_generator


@dataclass(frozen=True)
class SphereSampler:
    """
    Seeded source of sphere samples; max_workers only spreads chunks over threads.
    """

    n: int
    seed: int
    antithetic: bool = True
    max_workers: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"Invalid dimension n={self.n}")
        if self.max_workers < 1:
            raise ValueError(f"Invalid max_workers={self.max_workers}. Must be >= 1")

    def generator(self, stream: StreamId, *keys: int) -> np.random.Generator:
        return stream_generator(self.seed, stream, *keys)


def _uniform_points(rng: np.random.Generator, count: int, n: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return random_sphere_points(rng, count, n)
    half = random_sphere_points(rng, (count + 1) // 2, n)
    return np.concatenate([half, -half])[:count]


def sample_sphere(
    sampler: SphereSampler, count: int, stream: StreamId = StreamId.GEOMETRY, grid_index: int = 0
) -> np.ndarray:
    """
    count uniform points of S as rows of a complex (count, n) array.
    """
    chunks = [
        _uniform_points(sampler.generator(stream, grid_index, index), size, sampler.n, sampler.antithetic)
        for index, size in enumerate(chunk_sizes(count))
    ]
    return np.concatenate(chunks)


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    std_error: float
    samples: int
    jackknife_bias: float = 0.0
    budget_exhausted: bool = False

    def __post_init__(self):
        if self.std_error < 0 or self.value < 0:
            raise ValueError(f"Invalid estimate value={self.value}, std_error={self.std_error}")

    @classmethod
    def exact(cls, value: float) -> "MeanEstimate":
        return cls(value=float(value), std_error=0.0, samples=0)

    @property
    def relative_error(self) -> float:
        if self.value == 0.0:
            return 0.0 if self.std_error == 0.0 else math.inf
        return self.std_error / self.value


@dataclass(frozen=True)
class BudgetPolicy:
    """
    Sample budget: start at initial, double until the relative standard error drops
    below rel_error or cap is reached.
    """

    initial: int = 2**14
    cap: int = 2**20
    rel_error: float = 0.02

    def __post_init__(self):
        if self.initial < 1 or self.cap < self.initial:
            raise ValueError(f"Invalid budget initial={self.initial}, cap={self.cap}")
        if not 0 < self.rel_error < 1:
            raise ValueError(f"Invalid rel_error={self.rel_error}. Must be in (0, 1)")

    def scaled(self, scale: float) -> "BudgetPolicy":
        if scale <= 0:
            raise ValueError(f"Invalid budget scale={scale}. Must be > 0")
        initial = max(1, int(round(self.initial * scale)))
        return BudgetPolicy(initial, max(initial, int(round(self.cap * scale))), self.rel_error)


def _sample_cap(
    rng: np.random.Generator, count: int, center: np.ndarray, t: float, eps: float
) -> np.ndarray:
    """
    Uniform points of {xi in S : |1 - t <xi, center>| < eps} by rejection in (|zeta|, arg zeta),
    zeta = <xi, center>.
    """
    n = center.size
    out: List[np.ndarray] = []
    needed = count
    if eps >= 1.0:
        theta_max = math.pi
    else:
        rho_star = math.sqrt(1.0 - eps * eps) / t
        kappa_min = math.sqrt(1.0 - eps * eps) if rho_star <= 1.0 else (1.0 + t * t - eps * eps) / (2.0 * t)
        theta_max = math.acos(min(max(kappa_min, -1.0), 1.0))
    rho_lo = max(0.0, (1.0 - eps) / t)
    u_hi = (1.0 - rho_lo) * (1.0 + rho_lo)
    while needed > 0:
        batch = 2 * needed + 16
        if n == 1:
            rho = np.ones(batch)
        else:
            rho = np.sqrt(1.0 - u_hi * rng.random(batch) ** (1.0 / (n - 1)))
        theta = theta_max * (2.0 * rng.random(batch) - 1.0)
        zeta = rho * np.exp(1j * theta)
        keep = np.abs(1.0 - t * zeta) < eps
        zeta = zeta[keep][:needed]
        if n == 1:
            points = zeta[:, None] * center[None, :]
        else:
            g = rng.standard_normal((zeta.size, n)) + 1j * rng.standard_normal((zeta.size, n))
            g = g - inner_batch(g, center)[:, None] * center[None, :]
            g /= np.sqrt(norm_sq_batch(g))[:, None]
            radial = np.sqrt(np.maximum(1.0 - np.abs(zeta) ** 2, 0.0))
            points = zeta[:, None] * center[None, :] + radial[:, None] * g
        out.append(points)
        needed -= zeta.size
    return np.concatenate(out) if out else np.zeros((0, n), dtype=np.complex128)


@dataclass(frozen=True)
class CapMixture:
    """
    Proposal q = beta * sigma + (1 - beta) * mean over valid (center, level) caps of
    sigma restricted to the cap and normalized. Cap (a, l) is
    {xi : |1 - t_a <xi, c_a>| < eps_l}.
    """

    n: int
    centers: np.ndarray
    radii: np.ndarray
    levels: np.ndarray
    beta: float
    cap_sizes: np.ndarray = field(init=False)
    valid: np.ndarray = field(init=False)

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.complex128).reshape(-1, self.n)
        radii = np.asarray(self.radii, dtype=float).reshape(-1)
        levels = np.asarray(self.levels, dtype=float).reshape(-1)
        if radii.size != len(centers):
            raise ValueError("CapMixture needs one radius per center")
        sizes = np.array(
            [[cap_measure(float(t), float(e), self.n) for e in levels] for t in radii]
        ).reshape(len(centers), levels.size)
        valid = sizes > 0
        beta = 1.0 if not np.any(valid) else float(self.beta)
        if not 0.0 <= beta <= 1.0:
            raise ValueError(f"Invalid defensive weight beta={beta}")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cap_sizes", sizes)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def uniform(cls, n: int) -> "CapMixture":
        return cls(n, np.zeros((0, n)), np.zeros(0), np.zeros(0), 1.0)

    @property
    def component_count(self) -> int:
        return int(np.count_nonzero(self.valid))

    def density(self, xi: np.ndarray) -> np.ndarray:
        """
        q(xi) with respect to sigma.
        """
        q = np.full(len(xi), self.beta)
        if self.component_count == 0:
            return q
        ip = xi @ np.conj(self.centers).T
        gap = np.abs(1.0 - ip * self.radii[None, :])
        share = (1.0 - self.beta) / self.component_count
        for level_index, eps in enumerate(self.levels):
            ok = self.valid[:, level_index]
            inside = (gap[:, ok] < eps) / self.cap_sizes[ok, level_index][None, :]
            q += share * inside.sum(axis=1)
        return q

    def sample(self, rng: np.random.Generator, count: int, antithetic: bool = False) -> np.ndarray:
        if self.component_count == 0:
            return _uniform_points(rng, count, self.n, antithetic)
        from_caps = rng.random(count) >= self.beta
        components = np.argwhere(self.valid)
        choice = rng.integers(0, len(components), size=count)
        points = random_sphere_points(rng, count, self.n)
        picked = choice[from_caps]
        slots = np.flatnonzero(from_caps)
        for component in np.unique(picked):
            rows = slots[picked == component]
            a, l = components[component]
            points[rows] = _sample_cap(rng, rows.size, self.centers[a], float(self.radii[a]), float(self.levels[l]))
        return points


@dataclass(frozen=True)
class _ChunkStats:
    total: float
    total_sq: float
    count: int


def _run_chunks(task: Callable[[int], _ChunkStats], indices: Sequence[int], max_workers: int) -> List[_ChunkStats]:
    if max_workers <= 1 or len(indices) <= 1:
        return [task(i) for i in indices]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(task, indices))


def estimate_power_mean(
    integrand: Callable[[np.ndarray], np.ndarray],
    mixture: CapMixture,
    p: float,
    sampler: SphereSampler,
    stream: StreamId,
    grid_index: int,
    budget: BudgetPolicy,
) -> MeanEstimate:
    """
    (int_S integrand^p dsigma)^{1/p} with the given proposal, adaptive budget and
    delta-method standard error of the 1/p root.
    """

    def task(chunk_index: int) -> _ChunkStats:
        rng = sampler.generator(stream, grid_index, chunk_index)
        xi = mixture.sample(rng, CHUNK_SIZE, sampler.antithetic)
        values = integrand(xi)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError(f"Non-finite or negative integrand on chunk {chunk_index} of grid point {grid_index}")
        ratio = values**p / mixture.density(xi)
        return _ChunkStats(float(ratio.sum()), float((ratio**2).sum()), ratio.size)

    stats: List[_ChunkStats] = []
    target_chunks = max(1, math.ceil(budget.initial / CHUNK_SIZE))
    cap_chunks = max(target_chunks, math.ceil(budget.cap / CHUNK_SIZE))
    while True:
        stats.extend(_run_chunks(task, range(len(stats), target_chunks), sampler.max_workers))
        estimate = _reduce(stats, p)
        if estimate.relative_error < budget.rel_error:
            return estimate
        if target_chunks >= cap_chunks:
            logger.warning(
                f"Sample cap {cap_chunks * CHUNK_SIZE} reached on grid point {grid_index} "
                f"with relative error {estimate.relative_error:.3g}"
            )
            return MeanEstimate(
                estimate.value, estimate.std_error, estimate.samples, estimate.jackknife_bias, True
            )
        target_chunks = min(2 * target_chunks, cap_chunks)
        logger.debug(f"Doubling budget to {target_chunks * CHUNK_SIZE} samples on grid point {grid_index}")


def _reduce(stats: Sequence[_ChunkStats], p: float) -> MeanEstimate:
    totals = np.array([s.total for s in stats])
    counts = np.array([s.count for s in stats], dtype=float)
    samples = int(counts.sum())
    total = float(np.sum(totals))
    mean = total / samples
    variance = max(sum(s.total_sq for s in stats) / samples - mean * mean, 0.0)
    mean_se = math.sqrt(variance / max(samples - 1, 1))
    value = mean ** (1.0 / p)
    std_error = 0.0 if mean == 0.0 else mean_se * value / (p * mean)
    bias = 0.0
    if len(stats) > 1:
        loo = ((total - totals) / (samples - counts)) ** (1.0 / p)
        bias = float((len(stats) - 1) * (loo.mean() - value))
    return MeanEstimate(value, std_error, samples, bias)


def radial_potential(mu: Measure, r: float, params: GreenKernelParams) -> float:
    """
    The rotation-invariant part of G_mu (origin atoms and radial densities) at radius r,
    from int_S G(z, t eta) dsigma(eta) = g(max(|z|, t)).
    """
    n = mu.n
    origin_mass = float(np.sum(mu.atom_masses[mu.origin_atoms]))
    if origin_mass > 0 and r == 0:
        raise GreenPoleError(
            "Evaluation point coincides with an atom at the origin",
            atom_index=int(np.flatnonzero(mu.origin_atoms)[0]),
        )
    g_r = little_g(r, params) if r > 0 else 0.0
    total = origin_mass * g_r
    for density in mu.densities:
        if r > 0:
            total += g_r * density_mass(density, n, 0.0, r)
        total += density_green_tail(density, n, r)
    return total


def potential_at(
    z: Point,
    mu: Measure,
    params: GreenKernelParams,
    sampler: Optional[SphereSampler] = None,
    count: int = 2**16,
    method: str = "radial",
) -> MeanEstimate:
    """
    G_mu(z): atoms summed exactly, densities by the radial reduction or (method="monte_carlo")
    by importance sampling of the measure.
    """
    if z.n != mu.n or params.n != mu.n:
        raise ValueError(f"Dimension mismatch : z={z.n}, measure={mu.n}, params={params.n}")
    if z.norm >= 1.0:
        raise ValueError(f"potential_at needs |z| < 1, got {z.norm!r}")
    if method not in ("radial", "monte_carlo"):
        raise ValueError(f"Invalid method : {method}. Must be radial or monte_carlo")
    value = 0.0
    if mu.atoms:
        value += float(green_matrix(z.coords[None, :], mu.atom_locations, params)[0] @ mu.atom_masses)
    if not mu.densities:
        return MeanEstimate.exact(value)
    if method == "radial":
        density_only = Measure(mu.n, densities=mu.densities)
        return MeanEstimate.exact(value + radial_potential(density_only, z.norm, params))
    if sampler is None:
        raise ValueError("The monte_carlo method needs a SphereSampler")
    density_only = Measure(mu.n, densities=mu.densities)
    sample = sample_from_measure(density_only, sampler.seed, count)
    estimate, std_error = sample.integrate(lambda w: green_matrix(z.coords[None, :], w, params)[0])
    return MeanEstimate(value + estimate, std_error, count * len(mu.densities))


def mean_levels(r: float) -> np.ndarray:
    """
    Dyadic cap sizes 2^{-1}, ..., reaching below (1 - r) / 4.
    """
    depth = math.ceil(math.log2(1.0 / (1.0 - r))) + 2
    return 2.0 ** -np.arange(1, depth + 1)


MEAN_DEFENSIVE_WEIGHT = 0.25


def pth_mean(
    r: float,
    mu: Measure,
    p: float,
    sampler: SphereSampler,
    params: Optional[GreenKernelParams] = None,
    budget: Optional[BudgetPolicy] = None,
    override_p_range: bool = False,
    grid_index: int = 0,
    stream: StreamId = StreamId.MEAN,
) -> MeanEstimate:
    """
    m_p(r, G_mu). The rotation-invariant part is exact; the remaining atoms are handled by
    importance sampling over dyadic caps around their directions.
    """
    n = mu.n
    validate_p_range(p, n, override_p_range)
    validate_unit_interval("r", r)
    params = params or GreenKernelParams(n)
    budget = budget or BudgetPolicy()
    radial = radial_potential(mu, r, params)
    off_origin = ~mu.origin_atoms
    if not np.any(off_origin):
        return MeanEstimate.exact(radial)

    atom_indices = np.flatnonzero(off_origin)
    locations = mu.atom_locations[off_origin]
    masses = mu.atom_masses[off_origin]
    directions = locations / np.sqrt(norm_sq_batch(locations))[:, None]
    mixture = CapMixture(n, directions, np.ones(len(directions)), mean_levels(r), MEAN_DEFENSIVE_WEIGHT)

    def integrand(xi: np.ndarray) -> np.ndarray:
        try:
            return radial + green_matrix(r * xi, locations, params) @ masses
        except GreenPoleError as e:
            raise GreenPoleError(str(e), atom_index=int(atom_indices[e.atom_index])) from e

    return estimate_power_mean(integrand, mixture, p, sampler, stream, grid_index, budget)


def necessity_lower_bound(mu: Measure, r: float, xi: Point) -> float:
    """
    Pointwise lower bound (n+1)/(4^{n+1} n^2) * lambda(C(xi, 1-r)) / (1-r)^n for G_mu(r xi).
    """
    n = mu.n
    validate_unit_interval("r", r)
    constant = (n + 1) / (4 ** (n + 1) * n**2)
    return constant * carleson_mass(mu.weighted(), xi, 1.0 - r) / (1.0 - r) ** n
