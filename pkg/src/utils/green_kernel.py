"""
The radial Green function

    g(r) = (n+1)/(2n) * int_r^1 (1-t^2)^{n-1} t^{1-2n} dt

of the invariant Laplacian and the invariant Green function G(z, w) = g(|phi_w(z)|).

Closed form: away from the sphere (1 - r^2 >= 1/2) the term-by-term antiderivative of the
binomially expanded integrand (one logarithmic term). Near the sphere the same integral,
written in x = 1 - t^2, expands into the positive series

    g = (n+1)/(4n) * sum_j C(n+j-1, j) x^{n+j} / (n+j),

which keeps full relative accuracy where g ~ (1 - r^2)^n. Both branches take r^2 and
1 - r^2 separately so callers can supply each without cancellation.
"""

from enum import Enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.special import comb

from src.utils.ball_geometry import (
    Point,
    mobius_gap_batch,
    mobius_modulus_sq_batch,
)

POLE_RADIUS = 1e-14
SERIES_SWITCH = 0.5
_SERIES_MAX_TERMS = 400
_GAUSS_ORDER = 15

# g(r) r^{2n-2} tends to L = (n+1)/(4n(n-1)) as r -> 0, but approaches it like (1 - r^2)^n, so
# g(r) r^{2n-2} / (L (1 - r^2)^n) is the quantity bracketed. It stays below 1 and behaves like
# 1 - r^2/(n-2) for n > 2. At n = 2, where g(r) r^2 = (3/8)(1 - r^2) - (3/4) r^2 log(1/r),
# its smallest value on (0, 1/4] is 0.870, reached at r = 1/4.
ASYMP_RATIO_BRACKET: Tuple[float, float] = (0.85, 1.0)
ASYMP_RADIUS = 0.25
UPPER_FIT_RADIUS = 0.5


class GreenPoleError(ValueError):
    """
    Evaluation at (or within POLE_RADIUS of) the singularity of the Green function.
    """

    def __init__(self, message: str, atom_index: Optional[int] = None):
        super().__init__(message)
        self.atom_index = atom_index


class EvalPolicy(Enum):
    CLOSED_FORM = "closed_form"
    ADAPTIVE_QUADRATURE = "adaptive_quadrature"


@dataclass(frozen=True)
class GreenKernelParams:
    """
    Dimension and evaluation policy for g.
    """

    n: int
    eval_policy: EvalPolicy = EvalPolicy.CLOSED_FORM
    quadrature_tol: float = 1e-12

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"Invalid dimension n={self.n}. Must be an integer >= 1")
        if not 0 < self.quadrature_tol < 1e-3:
            raise ValueError(f"Invalid quadrature_tol={self.quadrature_tol}")

    @property
    def normalizer(self) -> float:
        return (self.n + 1) / (2 * self.n)


def _g_closed(r_sq: np.ndarray, n: int) -> np.ndarray:
    log_r_sq = np.log(r_sq)
    total = (-1.0) ** (n - 1) * (-0.5 * log_r_sq)
    for k in range(n - 1):
        m = n - 1 - k
        total = total + comb(n - 1, k, exact=True) * (-1.0) ** k * np.expm1(-m * log_r_sq) / (2 * m)
    return (n + 1) / (2 * n) * total


def _series_sum(gap: np.ndarray, n: int) -> np.ndarray:
    """
    S(x) = sum_j C(n+j-1, j) x^j / (n+j), so that g = (n+1)/(4n) x^n S(x).
    """
    term = np.ones_like(gap)
    total = term / n
    for j in range(1, _SERIES_MAX_TERMS):
        term = term * gap * (n + j - 1) / j
        contrib = term / (n + j)
        total = total + contrib
        if np.all(contrib <= 1e-17 * total):
            break
    return total


def _g_values(r_sq: np.ndarray, gap: np.ndarray, n: int) -> np.ndarray:
    r_sq = np.asarray(r_sq, dtype=float)
    gap = np.asarray(gap, dtype=float)
    out = np.empty(np.broadcast_shapes(r_sq.shape, gap.shape))
    r_sq, gap = np.broadcast_arrays(r_sq, gap)
    near = gap < SERIES_SWITCH
    if np.any(near):
        x = gap[near]
        out[near] = (n + 1) / (4 * n) * x**n * _series_sum(x, n)
    if np.any(~near):
        out[~near] = _g_closed(r_sq[~near], n)
    return out


def little_g_reduced(t: np.ndarray, n: int) -> np.ndarray:
    """
    g(t) / (1 - t)^n, bounded and smooth up to t = 1.
    """
    t = np.asarray(t, dtype=float)
    gap = (1.0 - t) * (1.0 + t)
    out = np.empty_like(t)
    near = gap < SERIES_SWITCH
    if np.any(near):
        x = gap[near]
        out[near] = (n + 1) / (4 * n) * (1.0 + t[near]) ** n * _series_sum(x, n)
    if np.any(~near):
        out[~near] = _g_closed(t[~near] ** 2, n) / (1.0 - t[~near]) ** n
    return out


@lru_cache(maxsize=8)
def _gauss_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def adaptive_gauss(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    rel_tol: float = 1e-12,
    max_panels: int = 200_000,
) -> float:
    """
    Adaptive bisection with a fixed-order Gauss-Legendre rule on every panel.
    """
    nodes, weights = _gauss_rule(_GAUSS_ORDER)

    def panel(lo: float, hi: float) -> float:
        half = 0.5 * (hi - lo)
        return half * float(np.dot(weights, f(0.5 * (lo + hi) + half * nodes)))

    whole = panel(a, b)
    scale = max(abs(whole), np.finfo(float).tiny)
    width = b - a
    stack = [(a, b, whole)]
    total = 0.0
    panels = 0
    while stack:
        lo, hi, estimate = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        panels += 1
        refined = left + right
        if abs(refined - estimate) <= rel_tol * scale * (hi - lo) / width or panels > max_panels:
            total += refined
        else:
            stack.append((mid, hi, right))
            stack.append((lo, mid, left))
    return total


def little_g_quadrature(r: float, params: GreenKernelParams) -> float:
    """
    Independent oracle: adaptive quadrature of the defining integral.
    """
    n = params.n
    _check_radius(r, n)
    if r == 1.0:
        return 0.0

    def integrand(t: np.ndarray) -> np.ndarray:
        return ((1.0 - t) * (1.0 + t)) ** (n - 1) * t ** (1 - 2 * n)

    return params.normalizer * adaptive_gauss(integrand, r, 1.0, params.quadrature_tol)


def _check_radius(r: float, n: int) -> None:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"Invalid radius r={r}. Must be in (0, 1]")
    if r < POLE_RADIUS:
        kind = "logarithmic pole" if n == 1 else f"pole of order {2 * n - 2}"
        raise GreenPoleError(f"g has a {kind} at r = 0 (got r={r})")


def little_g(r: float, params: GreenKernelParams) -> float:
    """
    g at radius r in (0, 1].
    """
    _check_radius(r, params.n)
    if params.eval_policy == EvalPolicy.ADAPTIVE_QUADRATURE:
        return little_g_quadrature(r, params)
    return float(_g_values(r * r, (1.0 - r) * (1.0 + r), params.n))


def green_matrix(z: np.ndarray, w: np.ndarray, params: GreenKernelParams) -> np.ndarray:
    """
    G(z_k, w_j) for z of shape (K, n) and w of shape (J, n); raises on any pole.
    """
    zz = np.asarray(z, dtype=np.complex128)[:, None, :]
    ww = np.asarray(w, dtype=np.complex128)[None, :, :]
    r_sq = mobius_modulus_sq_batch(zz, ww)
    poles = r_sq < POLE_RADIUS**2
    if np.any(poles):
        k, j = np.argwhere(poles)[0]
        raise GreenPoleError(
            f"Evaluation point {k} coincides with atom {j} (|phi| = {np.sqrt(r_sq[k, j]):.3g})",
            atom_index=int(j),
        )
    gap = mobius_gap_batch(zz, ww)
    if params.eval_policy == EvalPolicy.ADAPTIVE_QUADRATURE:
        radii = np.sqrt(r_sq)
        return np.vectorize(lambda r: little_g_quadrature(float(min(r, 1.0)), params))(radii)
    return _g_values(r_sq, gap, params.n)


def green_g(z: Point, w: Point, params: GreenKernelParams) -> float:
    """
    G(z, w) = g(|phi_w(z)|) for z, w in the open ball, z != w.
    """
    if z.n != w.n or z.n != params.n:
        raise ValueError(f"Dimension mismatch : z={z.n}, w={w.n}, params={params.n}")
    for name, point in (("z", z), ("w", w)):
        if point.norm >= 1.0:
            raise ValueError(f"green_g needs |{name}| < 1, got {point.norm!r}")
    return float(green_matrix(z.coords[None, :], w.coords[None, :], params)[0, 0])


@dataclass(frozen=True)
class LemmaABounds:
    """
    Checkable forms of the lower bound, the boundary upper bound and the origin asymptotics of g.
    """

    g_value: float
    lower_bound: float
    lower_ok: bool
    upper_constant: float
    upper_ok: Optional[bool]
    asymp_ratio: float
    asymp_normalized: Optional[float]
    asymp_ok: Optional[bool]


def leading_coefficient(n: int) -> float:
    """
    L = (n+1)/(4n(n-1)), the limit of g(r) r^{2n-2} as r -> 0 (n > 1).
    """
    if n < 2:
        raise ValueError("The origin asymptotics of g needs n > 1")
    return (n + 1) / (4 * n * (n - 1))


@lru_cache(maxsize=16)
def lemma_a_upper_constant(n: int, radius: float = UPPER_FIT_RADIUS) -> float:
    """
    sup of g(r) / (1 - r^2)^n over a fine grid of r in [radius, 1).
    """
    s = (1.0 - radius) * 2.0 ** (-np.arange(0, 200) / 4.0)
    r = 1.0 - s
    gap = s * (1.0 + r)
    ratio = _g_values(r * r, gap, n) / gap**n
    return float(np.max(ratio))


def lemma_a_bounds(z: Point, params: GreenKernelParams) -> LemmaABounds:
    """
    Evaluates g at |z| once and checks it against the lower bound everywhere, against the
    fitted boundary constant for |z| >= UPPER_FIT_RADIUS and, when n > 1 and |z| <= ASYMP_RADIUS,
    against ASYMP_RATIO_BRACKET. Checks that do not apply at |z| are reported as None.
    """
    n = params.n
    if z.n != n:
        raise ValueError(f"Dimension mismatch : z={z.n}, params={n}")
    r = z.norm
    if not 0.0 < r < 1.0:
        raise ValueError(f"lemma_a_bounds needs 0 < |z| < 1, got {r!r}")
    gap = (1.0 - r) * (1.0 + r)
    g_value = float(_g_values(r * r, gap, n))
    lower_bound = (n + 1) / (4 * n**2) * gap**n
    upper_constant = lemma_a_upper_constant(n)
    upper_ok = None
    if r >= UPPER_FIT_RADIUS:
        upper_ok = bool(g_value / gap**n <= upper_constant * (1.0 + 1e-12))
    asymp_ratio = g_value * r ** (2 * n - 2)
    asymp_normalized = None
    asymp_ok = None
    if n > 1:
        asymp_normalized = asymp_ratio / (leading_coefficient(n) * gap**n)
        if r <= ASYMP_RADIUS:
            low, high = ASYMP_RATIO_BRACKET
            asymp_ok = bool(low <= asymp_normalized <= high * (1.0 + 1e-12))
    return LemmaABounds(
        g_value=g_value,
        lower_bound=lower_bound,
        lower_ok=bool(g_value >= lower_bound),
        upper_constant=upper_constant,
        upper_ok=upper_ok,
        asymp_ratio=asymp_ratio,
        asymp_normalized=asymp_normalized,
        asymp_ok=asymp_ok,
    )
