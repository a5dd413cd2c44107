import re
from enum import Enum
from pathlib import Path
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Tuple
from src.config.app import CatalogPaths
from src.config.config_validator import (
    AdmissibilityError,
    validate_gamma_range,
    validate_p_range,
    validate_positive_value,
)
from src.config.input import SpecParseError, YamlDocument, load_measure_file
from src.utils.measure_model import BUILTIN_MEASURES, Measure
from src.utils.sphere_integration import BudgetPolicy


class CheckName(Enum):
    """
    Named assertions a scenario can request.
    """

    GEOMETRY_IDENTITIES = "geometry_identities"
    INCLUSION_10 = "inclusion_10"
    LEMMA_A_BOUNDS = "lemma_a_bounds"
    KERNEL_QUADRATURE_AGREEMENT = "kernel_quadrature_agreement"
    MEAN_EQUALS_GREEN = "mean_equals_green"
    SMOOTHNESS_EXPONENT = "smoothness_exponent"
    LEBESGUE_SMOOTHNESS_BOUND = "lebesgue_smoothness_bound"
    LEBESGUE_MEAN_BOUND = "lebesgue_mean_bound"
    LEBESGUE_SHARP_EXPONENTS = "lebesgue_sharp_exponents"
    THEOREM1_FORWARD = "theorem1_forward"
    THEOREM1_REVERSE = "theorem1_reverse"
    THEOREM_A1_VANISHING = "theorem_a1_vanishing"
    THEOREM2_LITTLE_O = "theorem2_little_o"
    PROPOSITION1_LITTLE_O = "proposition1_little_o"
    LEMMA1_BOUNDEDNESS = "lemma1_boundedness"
    GAUGE_POWER = "gauge_power"
    COROLLARY1_BOUNDED = "corollary1_bounded"
    POWER_MEAN_MONOTONE = "power_mean_monotone"


# The growth equivalence and its corollaries are stated for n > 1.
CHECKS_NEEDING_N_ABOVE_1 = {
    CheckName.THEOREM1_FORWARD,
    CheckName.THEOREM1_REVERSE,
    CheckName.THEOREM2_LITTLE_O,
    CheckName.LEBESGUE_SHARP_EXPONENTS,
    CheckName.GAUGE_POWER,
    CheckName.COROLLARY1_BOUNDED,
}

BUILTIN_PREFIX = "builtin:"
_NAME_PATTERN = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$")


@dataclass(frozen=True)
class GridSpec:
    """
    Dyadic grid 2^-first_exponent, ..., 2^-last_exponent.
    """

    first_exponent: int
    last_exponent: int

    def __post_init__(self):
        if self.first_exponent < 1:
            raise ValueError(f"Invalid first_exponent={self.first_exponent}. Must be >= 1")
        if self.last_exponent - self.first_exponent + 1 < 5:
            raise ValueError(
                f"Grid 2^-{self.first_exponent}..2^-{self.last_exponent} has fewer than 5 points"
            )

    @property
    def values(self) -> Tuple[float, ...]:
        return tuple(2.0**-k for k in range(self.first_exponent, self.last_exponent + 1))


@dataclass(frozen=True)
class Tolerances:
    exponent: float = 0.25
    lebesgue_smoothness: float = 0.15
    lebesgue_mean: float = 0.2
    sharp_exponent: float = 0.3
    kernel_relative: float = 1e-10
    identity: float = 1e-10
    lemma1_spread: float = 100.0
    vanishing_ratio: float = 0.5
    power_mean_sigmas: float = 2.0
    gauge_cap: float = 4.0
    asymp_variation: float = 0.25

    def __post_init__(self):
        validate_positive_value(asdict(self))


@dataclass(frozen=True)
class Trials:
    identity: int = 1000
    inclusion: int = 100_000
    kernel_radii: int = 200

    def __post_init__(self):
        validate_positive_value(asdict(self))


@dataclass(frozen=True)
class Scenario:
    """
    A named verification suite: measures, exponents, grids, budgets and the checks to run.
    """

    name: str
    n: int
    p: float
    checks: Tuple[str, ...]
    measures: Tuple[str, ...] = ()
    gamma_expected: Optional[float] = None
    override_p_range: bool = False
    r_grid: GridSpec = GridSpec(2, 8)
    delta_grid: GridSpec = GridSpec(3, 9)
    seed: Optional[int] = None
    budgets: BudgetPolicy = BudgetPolicy()
    tolerances: Tolerances = Tolerances()
    trials: Trials = Trials()
    source: Optional[Path] = field(default=None, compare=False)

    def __post_init__(self):
        if not _NAME_PATTERN.match(self.name):
            raise ValueError(f"Invalid scenario name '{self.name}'")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"Invalid dimension n={self.n}. Must be an integer >= 1")
        validate_p_range(self.p, self.n, self.override_p_range)
        if self.gamma_expected is not None:
            validate_gamma_range(self.gamma_expected, self.n)
        allowed = [c.value for c in CheckName]
        if not self.checks:
            raise ValueError("A scenario needs at least one check")
        if len(set(self.checks)) != len(self.checks):
            raise ValueError(f"Duplicate checks in {list(self.checks)}")
        for check in self.checks:
            if check not in allowed:
                raise ValueError(f"Unknown check '{check}'. Must be one of {', '.join(allowed)}")
            if self.n == 1 and CheckName(check) in CHECKS_NEEDING_N_ABOVE_1:
                raise ValueError(f"Check '{check}' needs n > 1")
        if self.seed is not None and self.seed < 0:
            raise ValueError(f"Invalid seed={self.seed}. Must be >= 0")

    def base_dir(self) -> Path:
        return self.source.parent if self.source else CatalogPaths.SCENARIOS

    def to_config(self) -> Dict[str, Any]:
        """
        Effective scenario values as plain data.
        """
        config = asdict(self)
        config.pop("source")
        config["checks"] = list(self.checks)
        config["measures"] = list(self.measures)
        return config


class ScenarioFileSpecs:
    """
    Field names of scenario documents.
    """

    class Fields(Enum):
        NAME = "name"
        MEASURES = "measures"
        DIMENSION = "dimension"
        P = "p"
        GAMMA_EXPECTED = "gamma_expected"
        OVERRIDE_P_RANGE = "override_p_range"
        R_GRID = "r_grid"
        DELTA_GRID = "delta_grid"
        SEED = "seed"
        BUDGETS = "budgets"
        TOLERANCES = "tolerances"
        TRIALS = "trials"
        CHECKS = "checks"

    REQUIRED = (Fields.NAME, Fields.DIMENSION, Fields.P, Fields.CHECKS)
    GRID_FIELDS = ("first_exponent", "last_exponent")
    BUDGET_FIELDS = ("initial", "cap", "rel_error")


def _grid(doc: YamlDocument, value: Any, key: str) -> GridSpec:
    mapping = doc.mapping(value, (key,))
    doc.reject_unknown(mapping, ScenarioFileSpecs.GRID_FIELDS, (key,))
    try:
        return GridSpec(*(doc.integer(mapping.get(f), (key, f)) for f in ScenarioFileSpecs.GRID_FIELDS))
    except SpecParseError:
        raise
    except ValueError as e:
        raise doc.error(str(e), (key,))


def _numbers(doc: YamlDocument, value: Any, key: str, allowed: Tuple[str, ...], integers: Tuple[str, ...] = ()) -> Dict[str, Any]:
    mapping = doc.mapping(value, (key,))
    doc.reject_unknown(mapping, allowed, (key,))
    return {
        k: doc.integer(v, (key, k)) if k in integers else doc.number(v, (key, k))
        for k, v in mapping.items()
    }


def parse_scenario_document(doc: YamlDocument, override_p_range: bool = False) -> Scenario:
    """
    Builds a Scenario from a scenario document; override_p_range widens the p check.
    """
    fields = ScenarioFileSpecs.Fields
    data = doc.data
    doc.reject_unknown(data, [f.value for f in fields], ())
    for required in ScenarioFileSpecs.REQUIRED:
        if required.value not in data:
            raise doc.error(f"Missing field '{required.value}'", ())

    kwargs: Dict[str, Any] = {}
    name = data[fields.NAME.value]
    if not isinstance(name, str):
        raise doc.error("Expected a string", (fields.NAME.value,))
    kwargs["name"] = name
    kwargs["n"] = doc.integer(data[fields.DIMENSION.value], (fields.DIMENSION.value,))
    kwargs["p"] = doc.number(data[fields.P.value], (fields.P.value,))

    checks = doc.sequence(data[fields.CHECKS.value], (fields.CHECKS.value,))
    for i, check in enumerate(checks):
        if not isinstance(check, str):
            raise doc.error("Expected a check name", (fields.CHECKS.value, i))
    kwargs["checks"] = tuple(checks)

    measures = doc.sequence(data.get(fields.MEASURES.value), (fields.MEASURES.value,))
    for i, ref in enumerate(measures):
        if not isinstance(ref, str):
            raise doc.error("Expected a measure reference", (fields.MEASURES.value, i))
    kwargs["measures"] = tuple(measures)

    if data.get(fields.GAMMA_EXPECTED.value) is not None:
        kwargs["gamma_expected"] = doc.number(data[fields.GAMMA_EXPECTED.value], (fields.GAMMA_EXPECTED.value,))
    file_override = data.get(fields.OVERRIDE_P_RANGE.value, False)
    if not isinstance(file_override, bool):
        raise doc.error("Expected true or false", (fields.OVERRIDE_P_RANGE.value,))
    kwargs["override_p_range"] = file_override or override_p_range
    for key, target in ((fields.R_GRID.value, "r_grid"), (fields.DELTA_GRID.value, "delta_grid")):
        if key in data:
            kwargs[target] = _grid(doc, data[key], key)
    if data.get(fields.SEED.value) is not None:
        kwargs["seed"] = doc.integer(data[fields.SEED.value], (fields.SEED.value,))

    sections = (
        (fields.BUDGETS.value, BudgetPolicy, ScenarioFileSpecs.BUDGET_FIELDS, ("initial", "cap")),
        (fields.TOLERANCES.value, Tolerances, tuple(Tolerances.__dataclass_fields__), ()),
        (fields.TRIALS.value, Trials, tuple(Trials.__dataclass_fields__), tuple(Trials.__dataclass_fields__)),
    )
    for key, cls, allowed, integers in sections:
        if key in data:
            values = _numbers(doc, data[key], key, allowed, integers)
            try:
                kwargs[key] = cls(**values)
            except ValueError as e:
                raise doc.error(str(e), (key,))

    try:
        return Scenario(**kwargs, source=doc.source)
    except AdmissibilityError as e:
        raise AdmissibilityError(f"{doc.source or '<document>'}:{doc.line_of((fields.P.value,))}: {e}")
    except ValueError as e:
        raise doc.error(str(e), ())


def load_scenario_file(path: Path, override_p_range: bool = False) -> Scenario:
    return parse_scenario_document(YamlDocument.from_path(path), override_p_range)


def catalog() -> Dict[str, Path]:
    """
    Shipped scenario documents keyed by file stem, in name order.
    """
    return {path.stem: path for path in sorted(CatalogPaths.SCENARIOS.glob("*.yaml"))}


def find_scenario(target: str, override_p_range: bool = False) -> Scenario:
    """
    Resolves a catalog name or a path to a scenario document.
    """
    path = Path(target)
    if path.suffix in (".yaml", ".yml") or path.exists():
        if not path.exists():
            raise ValueError(f"Scenario file '{target}' does not exist")
        return load_scenario_file(path, override_p_range)
    entries = catalog()
    if target not in entries:
        raise ValueError(f"Unknown scenario '{target}'. Available : {', '.join(entries)}")
    return load_scenario_file(entries[target], override_p_range)


@dataclass(frozen=True)
class ScenarioSummary:
    name: str
    n: int
    p: float
    measures: Tuple[str, ...]
    checks: Tuple[str, ...]
    path: Path


def list_scenarios() -> List[ScenarioSummary]:
    summaries = []
    for _, path in catalog().items():
        scenario = load_scenario_file(path)
        summaries.append(
            ScenarioSummary(scenario.name, scenario.n, scenario.p, scenario.measures, scenario.checks, path)
        )
    return sorted(summaries, key=lambda s: s.name)


def resolve_measure(ref: str, scenario: Scenario, seed: int) -> Measure:
    """
    Builds the measure named by a scenario reference: builtin:<name> or a document path.
    Catalog scenarios look in the measure catalog first, other scenarios next to their own file.
    The scenario document itself is never read as a measure.
    """
    if ref.startswith(BUILTIN_PREFIX):
        name = ref[len(BUILTIN_PREFIX):]
        if name not in BUILTIN_MEASURES:
            raise ValueError(f"Unknown builtin measure '{name}'. Available : {', '.join(BUILTIN_MEASURES)}")
        return BUILTIN_MEASURES[name](scenario.n, seed)
    local = scenario.base_dir() / ref
    if scenario.base_dir().resolve() == CatalogPaths.SCENARIOS.resolve():
        candidates = [Path(ref), CatalogPaths.MEASURES / ref, local]
    else:
        candidates = [Path(ref), local, CatalogPaths.MEASURES / ref]
    own = scenario.source.resolve() if scenario.source else None
    path = next((c for c in candidates if c.is_file() and c.resolve() != own), None)
    if path is None:
        raise ValueError(f"Measure document '{ref}' not found")
    measure = load_measure_file(path)
    if measure.n != scenario.n:
        raise ValueError(f"Measure '{ref}' has dimension {measure.n}, scenario '{scenario.name}' has {scenario.n}")
    return measure
