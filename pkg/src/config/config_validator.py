import math
from typing import Dict, List, Sequence


class AdmissibilityError(ValueError):
    """
    Raised when the exponent p lies outside the range covered by the growth theorems.
    """


def validate_value_is_allowed(value: str, allowed_values: List[str]) -> None:
    """
    Validates that a variable value is within a list of allowed values.
    """
    if value not in allowed_values:
        raise ValueError(
            f"Invalid value : {value}. Must be {' or '.join(allowed_values)}"
        )


def validate_positive_value(vars_dict: Dict[str, float]) -> None:
    """
    Validates that numeric values are finite and greater than 0.
    """
    for key, val in vars_dict.items():
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ValueError(f"Invalid value for {key}={val}. Must be numeric")
        if not math.isfinite(val) or val <= 0:
            raise ValueError(f"Invalid value for {key}={val}. Must be greater than 0")


def validate_unit_interval(name: str, value: float, closed_right: bool = False) -> None:
    """
    Validates 0 < value < 1 (or 0 < value <= 1).
    """
    upper_ok = value <= 1 if closed_right else value < 1
    if not (value > 0 and upper_ok):
        bracket = "]" if closed_right else ")"
        raise ValueError(f"Invalid value for {name}={value}. Must be in (0, 1{bracket}")


def critical_exponent(n: int) -> float:
    """
    Upper end (2n-1)/(2(n-1)) of the admissible p-range; infinite for n = 1.
    """
    if n == 1:
        return math.inf
    return (2 * n - 1) / (2 * (n - 1))


def validate_p_range(p: float, n: int, override: bool = False) -> None:
    """
    Validates 1 < p < (2n-1)/(2(n-1)); with override any p in (0, inf) passes.
    """
    if not math.isfinite(p) or p <= 0:
        raise AdmissibilityError(f"Invalid value for p={p}. Must be in (0, inf)")
    if override:
        return
    upper = critical_exponent(n)
    if not 1 < p < upper:
        raise AdmissibilityError(
            f"Invalid value for p={p} with n={n}. Must be in (1, {upper:g}) "
            "unless the p-range override is set"
        )


def validate_gamma_range(gamma: float, n: int) -> None:
    """
    Validates 0 <= gamma < 2n.
    """
    if not 0 <= gamma < 2 * n:
        raise ValueError(f"Invalid value for gamma={gamma} with n={n}. Must be in [0, {2 * n})")


def validate_geometric_grid(
    name: str, grid: Sequence[float], ratio: float = None, min_points: int = 4
) -> None:
    """
    Validates a strictly decreasing positive geometric grid (optionally with a fixed ratio).
    """
    if len(grid) < min_points:
        raise ValueError(f"Grid '{name}' has {len(grid)} points. Needs at least {min_points}")
    if any(v <= 0 for v in grid):
        raise ValueError(f"Grid '{name}' must be positive")
    ratios = [b / a for a, b in zip(grid[:-1], grid[1:])]
    if any(q >= 1 for q in ratios):
        raise ValueError(f"Grid '{name}' must be strictly decreasing")
    reference = ratios[0] if ratio is None else ratio
    if any(abs(q - reference) > 1e-9 * reference for q in ratios):
        raise ValueError(f"Grid '{name}' must be geometric with ratio {reference:g}")
