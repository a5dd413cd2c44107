"""
The smoothness functional Lambda_p(delta) = (int_S lambda^p(C(xi, delta)) dsigma(xi))^{1/p},
log-log exponent fits, the sphere packing inequality for boundary measures and gauge
comparisons.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.config.config_validator import (
    validate_geometric_grid,
    validate_unit_interval,
    validate_value_is_allowed,
)
from src.utils.ball_geometry import norm_sq_batch
from src.utils.measure_model import BoundaryMeasure, Measure, cap_measure, density_carleson_mass
from src.utils.sphere_integration import (
    BudgetPolicy,
    CapMixture,
    MeanEstimate,
    SphereSampler,
    estimate_power_mean,
)
from src.utils.streams import StreamId

SMOOTHNESS_DEFENSIVE_WEIGHT = 0.5


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    residual_rms: float
    grid: Tuple[Tuple[float, float], ...]


def fit_exponent(points: Sequence[Tuple[float, float]]) -> GrowthFit:
    """
    Least-squares line through (log abscissa, log value); the slope is the growth exponent.
    """
    points = tuple((float(a), float(v)) for a, v in points)
    for index, (_, value) in enumerate(points):
        if not value > 0 or not math.isfinite(value):
            raise ValueError(f"Invalid value {value} at grid point {index}. Must be finite and > 0")
    abscissas = [a for a, _ in points]
    validate_geometric_grid("fit abscissas", abscissas)
    x = np.log(abscissas)
    y = np.log([v for _, v in points])
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    return GrowthFit(
        slope=float(slope),
        intercept=float(intercept),
        residual_rms=float(np.sqrt(np.mean(residuals**2))),
        grid=points,
    )


def smoothness_lp(
    nu: Measure,
    delta: float,
    p: float,
    sampler: SphereSampler,
    budget: Optional[BudgetPolicy] = None,
    grid_index: int = 0,
    stream: StreamId = StreamId.SMOOTHNESS,
    weighted: bool = True,
) -> MeanEstimate:
    """
    Lambda_p(delta) for lambda = (1 - |z|)^n nu, or for nu itself when weighted is False.

    Radial densities give a xi-independent mass; atoms enter through the caps
    {xi : |1 - |w| <xi, w/|w|>| < delta}. With no atom able to reach C(xi, delta) the
    value is exact, as it is for a single atom on its own. An unweighted density with
    infinite Carleson mass gives an infinite exact value.
    """
    validate_unit_interval("delta", delta)
    if not p > 1.0:
        raise ValueError(f"Invalid p={p}. Must be > 1")
    n = nu.n
    source = nu.weighted() if weighted else nu
    constant = density_carleson_mass(source, delta)
    norms = np.sqrt(norm_sq_batch(nu.atom_locations))
    active = (1.0 - norms) < delta
    if not np.any(active) or math.isinf(constant):
        return MeanEstimate.exact(constant)

    radii = norms[active]
    directions = nu.atom_locations[active] / radii[:, None]
    masses = source.atom_masses[active]
    if len(masses) == 1 and constant == 0.0:
        return MeanEstimate.exact(masses[0] * cap_measure(float(radii[0]), delta, n) ** (1.0 / p))

    beta = SMOOTHNESS_DEFENSIVE_WEIGHT if constant > 0 else 0.0
    mixture = CapMixture(n, directions, radii, np.array([delta]), beta)

    def integrand(xi: np.ndarray) -> np.ndarray:
        gap = np.abs(1.0 - (xi @ np.conj(directions).T) * radii[None, :])
        return constant + (gap < delta) @ masses

    return estimate_power_mean(integrand, mixture, p, sampler, stream, grid_index, budget or BudgetPolicy())


@dataclass(frozen=True)
class Lemma1Record:
    delta: float
    lhs: float
    rhs: float
    ratio: float
    rhs_std_error: float = 0.0
    budget_exhausted: bool = False


def lemma1_check(
    nu: BoundaryMeasure,
    delta: float,
    p: float,
    sampler: SphereSampler,
    budget: Optional[BudgetPolicy] = None,
    grid_index: int = 0,
) -> Lemma1Record:
    """
    Both sides of int_S nu^{p-1}(D(xi, delta)) dnu(xi) <~ delta^{-2n} int_S nu^p(D(xi, delta)) dsigma(xi)
    with D(xi, delta) = {d(., xi) < delta}, i.e. |1 - <., xi>| < delta^2.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"Invalid delta={delta}. Must be in (0, 1/2)")
    if not p >= 1.0:
        raise ValueError(f"Invalid p={p}. Must be >= 1")
    if len(nu.masses) == 0:
        return Lemma1Record(delta, 0.0, 0.0, 0.0)
    radius = delta * delta
    close = np.abs(1.0 - nu.points @ np.conj(nu.points).T) < radius
    ball_masses = close @ nu.masses
    lhs = float(nu.masses @ ball_masses ** (p - 1.0))

    mixture = CapMixture(nu.n, nu.points, np.ones(len(nu.masses)), np.array([radius]), 0.0)

    def integrand(xi: np.ndarray) -> np.ndarray:
        return (np.abs(1.0 - xi @ np.conj(nu.points).T) < radius) @ nu.masses

    estimate = estimate_power_mean(
        integrand, mixture, p, sampler, StreamId.LEMMA1, grid_index, budget or BudgetPolicy()
    )
    rhs = estimate.value**p
    rhs_se = p * estimate.value ** (p - 1.0) * estimate.std_error
    ratio = lhs * delta ** (2 * nu.n) / rhs
    return Lemma1Record(delta, lhs, rhs, ratio, rhs_se, estimate.budget_exhausted)


@dataclass(frozen=True)
class GaugeFunction:
    """
    Increasing Phi on [0, 1] with Phi(t delta) <= t^gamma Phi(delta) for t in (0, 1].
    """

    evaluator: Callable[[float], float]
    gamma: float
    name: str = "gauge"

    def __call__(self, delta: float) -> float:
        return float(self.evaluator(delta))

    def validate(self, n: int, grid_size: int = 64) -> None:
        """
        Checks 0 < gamma < 2n, monotonicity and the scaling inequality on a log grid of delta.
        """
        if not 0.0 < self.gamma < 2 * n:
            raise ValueError(f"Invalid gauge exponent gamma={self.gamma} with n={n}. Must be in (0, {2 * n})")
        deltas = np.geomspace(2.0**-20, 1.0, grid_size)
        values = np.array([self(d) for d in deltas])
        if np.any(np.diff(values) <= 0):
            raise ValueError(f"Gauge '{self.name}' is not increasing")
        for t in np.geomspace(2.0**-10, 1.0, 16):
            scaled = np.array([self(t * d) for d in deltas])
            if np.any(scaled > t**self.gamma * values * (1.0 + 1e-12)):
                raise ValueError(f"Gauge '{self.name}' violates Phi(t delta) <= t^gamma Phi(delta) at t={t:g}")


def power_gauge(gamma: float) -> GaugeFunction:
    """
    Phi(delta) = delta^gamma, the gauge for which the gauge comparison reduces to the power law.
    """
    return GaugeFunction(lambda d: d**gamma, gamma, f"power({gamma:g})")


def log_damped_gauge(gamma: float) -> GaugeFunction:
    """
    Phi(delta) = delta^gamma / log(e / delta).
    """

    def evaluator(d: float) -> float:
        if d == 0.0:
            return 0.0
        return d**gamma / (1.0 - math.log(d))

    return GaugeFunction(evaluator, gamma, f"log_damped({gamma:g})")


MEAN_SIDE = "mean-side"
SMOOTHNESS_SIDE = "smoothness-side"
GAUGE_BOUND_CAP = 4.0


@dataclass(frozen=True)
class GaugeComparison:
    bounded: bool
    margin: float
    ratio: float
    normalized: Tuple[float, ...]


def gauge_compare(
    series: Sequence[Tuple[float, float]],
    gauge: GaugeFunction,
    direction: str,
    n: Optional[int] = None,
    cap: float = GAUGE_BOUND_CAP,
) -> GaugeComparison:
    """
    Normalizes the series by Phi (and by (1 - r)^n on the mean side); bounded means the
    normalized sequence never exceeds cap times its coarsest value.
    """
    validate_value_is_allowed(direction, [MEAN_SIDE, SMOOTHNESS_SIDE])
    if direction == MEAN_SIDE and n is None:
        raise ValueError("The mean-side comparison needs the dimension n")
    normalized = []
    for index, (abscissa, value) in enumerate(series):
        if not value > 0:
            raise ValueError(f"Invalid value {value} at grid point {index}. Must be > 0")
        phi = gauge(abscissa)
        if phi == 0.0:
            raise ValueError(f"Gauge '{gauge.name}' vanishes at grid point {index} (abscissa {abscissa})")
        weight = abscissa**n if direction == MEAN_SIDE else 1.0
        normalized.append(value * weight / phi)
    normalized = np.array(normalized)
    margin = cap - float(normalized.max() / normalized[0])
    return GaugeComparison(
        bounded=margin >= 0.0,
        margin=margin,
        ratio=float(normalized.max() / normalized.min()),
        normalized=tuple(float(v) for v in normalized),
    )


@dataclass(frozen=True)
class BoundednessCriterion:
    """
    Both sides of the boundedness criterion m_p(r, G_mu) = O(1) iff Lambda_p(delta) = O(delta^n).
    """

    mean: GaugeComparison
    smoothness: GaugeComparison

    @property
    def agrees(self) -> bool:
        return self.mean.bounded == self.smoothness.bounded

    @property
    def bounded(self) -> bool:
        return self.mean.bounded and self.smoothness.bounded


def boundedness_criterion(
    mean: Sequence[Tuple[float, float]],
    smoothness: Sequence[Tuple[float, float]],
    n: int,
    cap: float = GAUGE_BOUND_CAP,
) -> BoundednessCriterion:
    """
    Compares m_p over the (1 - r)-grid and Lambda_p over the delta-grid with the power gauge
    at gamma = n, where the mean side reduces to m_p itself.
    """
    if n < 2:
        raise ValueError("The boundedness criterion needs n > 1")
    gauge = power_gauge(n)
    return BoundednessCriterion(
        mean=gauge_compare(mean, gauge, MEAN_SIDE, n, cap),
        smoothness=gauge_compare(smoothness, gauge, SMOOTHNESS_SIDE, n, cap),
    )


@dataclass(frozen=True)
class VanishingCheck:
    decreasing: bool
    last_over_first: float

    def passes(self, threshold: float = 0.5) -> bool:
        return self.decreasing and self.last_over_first < threshold

    @property
    def passed(self) -> bool:
        return self.passes()


def vanishing_check(values: Sequence[float]) -> VanishingCheck:
    """
    Finite surrogate for o(1): strictly decreasing after the coarsest point and last/first < 1/2.
    A sequence that has reached exactly 0 may stay there, so an all-zero sequence passes.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        raise ValueError("vanishing_check needs at least 3 values")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise ValueError("vanishing_check needs finite values >= 0")
    if values[0] == 0:
        # Nothing to decay from: fine only while the sequence stays at 0.
        at_zero = bool(np.all(values == 0))
        return VanishingCheck(decreasing=at_zero, last_over_first=0.0 if at_zero else math.inf)
    tail = values[1:]
    steps = (np.diff(tail) < 0) | ((tail[:-1] == 0) & (tail[1:] == 0))
    return VanishingCheck(
        decreasing=bool(np.all(steps)),
        last_over_first=float(values[-1] / values[0]),
    )
