import json
import math
import time
import numpy as np
import pandas as pd
from enum import Enum
from pathlib import Path
from dataclasses import dataclass, field, asdict
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
from src.config.app import AppConfig, app_config as default_app_config
from src.config.logger import logger
from src.config.scenarios import CheckName, Scenario, resolve_measure
from src.utils.ball_geometry import Point, identity_residuals, inclusion_trials
from src.utils.green_kernel import (
    EvalPolicy,
    GreenKernelParams,
    lemma_a_bounds,
    little_g,
    little_g_quadrature,
)
from src.utils.helpers import catch_exceptions, write_atomically
from src.utils.measure_model import Measure, ball_mass, boundary_test_measures
from src.utils.smoothness_functional import (
    MEAN_SIDE,
    SMOOTHNESS_SIDE,
    GrowthFit,
    boundedness_criterion,
    fit_exponent,
    gauge_compare,
    lemma1_check,
    power_gauge,
    smoothness_lp,
    vanishing_check,
)
from src.utils.sphere_integration import (
    BudgetPolicy,
    MeanEstimate,
    SphereSampler,
    potential_at,
    pth_mean,
)
from src.utils.streams import StreamId, stream_generator


RESULT_COLUMNS = ["scenario", "check", "quantity", "abscissa", "value", "std_error", "samples"]
CSV_FLOAT_FORMAT = "%.17g"
GRID_STRIDE = 1000
UNWEIGHTED_GRID_OFFSET = 500
KERNEL_DIMENSIONS = (1, 2, 3)


class CheckStatus(Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIP = "skip"


_SEVERITY = {CheckStatus.PASS: 0, CheckStatus.SKIP: 1, CheckStatus.FAIL: 2}


class SkipCheck(Exception):
    """
    Raised inside a check when its inputs do not allow a verdict.
    """


@dataclass(frozen=True)
class TableRow:
    quantity: str
    abscissa: float
    value: float
    std_error: float = 0.0
    samples: int = 0


@dataclass
class CheckOutcome:
    name: str
    status: str = CheckStatus.PASS.value
    reason: str = ""
    fits: Dict[str, Dict[str, float]] = field(default_factory=dict)
    rows: List[TableRow] = field(default_factory=list)

    def add_series(self, quantity: str, series: Sequence[Tuple[float, MeanEstimate]]) -> None:
        """
        One row per grid point, keeping standard errors and sample counts.
        """
        for abscissa, estimate in series:
            self.rows.append(
                TableRow(quantity, float(abscissa), float(estimate.value), float(estimate.std_error), int(estimate.samples))
            )

    def add_value(self, quantity: str, abscissa: float, value: float) -> None:
        self.rows.append(TableRow(quantity, float(abscissa), float(value)))

    def add_fit(self, key: str, fit: GrowthFit) -> None:
        self.fits[key] = {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "residual_rms": fit.residual_rms,
        }


@dataclass
class ResultRecord:
    """
    Outcome of one scenario run: one CheckOutcome per requested check and the effective configuration.
    """

    scenario: str
    checks: List[CheckOutcome]
    config: Dict[str, Any]
    elapsed_seconds: float = field(default=0.0, compare=False)

    @property
    def passed(self) -> bool:
        return all(c.status != CheckStatus.FAIL.value for c in self.checks)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        data = json.loads(text)
        checks = [
            CheckOutcome(
                name=c["name"],
                status=c["status"],
                reason=c["reason"],
                fits=c["fits"],
                rows=[TableRow(**row) for row in c["rows"]],
            )
            for c in data["checks"]
        ]
        return cls(data["scenario"], checks, data["config"], data.get("elapsed_seconds", 0.0))

    def table(self) -> pd.DataFrame:
        rows = [
            {"scenario": self.scenario, "check": check.name, **asdict(row)}
            for check in self.checks
            for row in check.rows
        ]
        return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def table_to_csv(df: pd.DataFrame) -> str:
    """
    CSV text with a fixed float format so equal tables give equal bytes.
    """
    return df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


@dataclass(frozen=True)
class RunSettings:
    """
    Values given on the command line; None falls back to the scenario, then the environment.
    """

    seed: Optional[int] = None
    budget_scale: Optional[float] = None
    out_dir: Optional[Path] = None
    override_p_range: bool = False
    max_workers: Optional[int] = None


@dataclass(frozen=True)
class EffectiveSettings:
    seed: int
    budget_scale: float
    budgets: BudgetPolicy
    max_workers: int
    out_dir: Path

    @classmethod
    def resolve(cls, scenario: Scenario, settings: RunSettings, app_config: AppConfig) -> "EffectiveSettings":
        defaults = app_config.run_defaults()
        if settings.seed is not None:
            seed = settings.seed
        elif scenario.seed is not None:
            seed = scenario.seed
        else:
            seed = defaults.seed
        scale = settings.budget_scale if settings.budget_scale is not None else defaults.budget_scale
        out_dir = Path(settings.out_dir) if settings.out_dir is not None else app_config.results_dir()
        return cls(
            seed=int(seed),
            budget_scale=float(scale),
            budgets=scenario.budgets.scaled(scale),
            max_workers=settings.max_workers or defaults.max_workers,
            out_dir=out_dir,
        )


@dataclass
class ScenarioDependencies:
    """
    Dependencies required for the scenario processor and orchestrator.
    """

    app_config: AppConfig
    scenario: Scenario
    settings: EffectiveSettings
    params: GreenKernelParams
    sampler: SphereSampler

    @classmethod
    def build(
        cls, scenario: Scenario, settings: RunSettings, app_config: AppConfig = default_app_config
    ) -> "ScenarioDependencies":
        effective = EffectiveSettings.resolve(scenario, settings, app_config)
        return cls(
            app_config=app_config,
            scenario=scenario,
            settings=effective,
            params=GreenKernelParams(scenario.n),
            sampler=SphereSampler(scenario.n, effective.seed, max_workers=effective.max_workers),
        )


Series = List[Tuple[float, MeanEstimate]]


class ScenarioProcessor:
    """
    Builds the scenario measures and computes (and caches) the mean and smoothness series.
    """

    def __init__(self, deps: ScenarioDependencies) -> None:
        self.deps = deps
        self.scenario = deps.scenario
        self._measures: Optional[List[Tuple[str, Measure]]] = None
        self._cache: Dict[Tuple[Any, ...], Series] = {}

    @property
    def measures(self) -> List[Tuple[str, Measure]]:
        if self._measures is None:
            self._measures = [
                (ref, resolve_measure(ref, self.scenario, self.deps.settings.seed))
                for ref in self.scenario.measures
            ]
        return self._measures

    @catch_exceptions
    def mean_series(self, index: int, p: Optional[float] = None) -> Series:
        """
        m_p(r, G_mu) along the r-grid, keyed by 1 - r.
        """
        p = self.scenario.p if p is None else p
        key = ("mean", index, p)
        if key not in self._cache:
            _, mu = self.measures[index]
            override = self.scenario.override_p_range or p != self.scenario.p
            series = []
            for i, s in enumerate(self.scenario.r_grid.values):
                estimate = pth_mean(
                    1.0 - s,
                    mu,
                    p,
                    self.deps.sampler,
                    self.deps.params,
                    self.deps.settings.budgets,
                    override_p_range=override,
                    grid_index=index * GRID_STRIDE + i,
                )
                series.append((s, estimate))
            logger.debug(f"Mean series of measure {index} at p={p} done")
            self._cache[key] = series
        return self._cache[key]

    @catch_exceptions
    def smoothness_series(self, index: int, stream: StreamId = StreamId.SMOOTHNESS, weighted: bool = True) -> Series:
        """
        Lambda_p(delta) along the delta-grid, for lambda (weighted) or for mu itself.
        """
        key = ("smoothness", index, stream, weighted)
        if key not in self._cache:
            _, mu = self.measures[index]
            offset = 0 if weighted else UNWEIGHTED_GRID_OFFSET
            series = []
            for i, delta in enumerate(self.scenario.delta_grid.values):
                estimate = smoothness_lp(
                    mu,
                    delta,
                    self.scenario.p,
                    self.deps.sampler,
                    self.deps.settings.budgets,
                    grid_index=index * GRID_STRIDE + offset + i,
                    stream=stream,
                    weighted=weighted,
                )
                series.append((delta, estimate))
            self._cache[key] = series
        return self._cache[key]


def _require_budget(series: Series, what: str) -> Series:
    for abscissa, estimate in series:
        if estimate.budget_exhausted:
            raise SkipCheck(f"sample budget exhausted for {what} at {abscissa:g}")
    return series


def _fit(outcome: CheckOutcome, key: str, series: Series) -> GrowthFit:
    """
    Fits the series without its coarsest point.
    """
    fit = fit_exponent([(a, e.value) for a, e in series[1:]])
    outcome.add_fit(key, fit)
    return fit


def _quantity(label: str, name: str) -> str:
    return f"{label}:{name}" if label else name


Verdict = Tuple[CheckStatus, str]


class ScenarioOrchestrator:
    """
    Runs the checks of a scenario and writes its record and table.
    """

    def __init__(self, processor: ScenarioProcessor) -> None:
        self.processor = processor

        self.scenario = processor.scenario
        self.settings = processor.deps.settings
        self.params = processor.deps.params
        self.sampler = processor.deps.sampler
        self.tol = self.scenario.tolerances
        self.registry: Dict[CheckName, Tuple[Callable[..., Verdict], bool]] = {
            CheckName.GEOMETRY_IDENTITIES: (self._geometry_identities, False),
            CheckName.INCLUSION_10: (self._inclusion_10, False),
            CheckName.LEMMA_A_BOUNDS: (self._lemma_a_bounds, False),
            CheckName.KERNEL_QUADRATURE_AGREEMENT: (self._kernel_quadrature_agreement, False),
            CheckName.LEMMA1_BOUNDEDNESS: (self._lemma1_boundedness, False),
            CheckName.MEAN_EQUALS_GREEN: (self._mean_equals_green, True),
            CheckName.SMOOTHNESS_EXPONENT: (self._smoothness_exponent, True),
            CheckName.LEBESGUE_SMOOTHNESS_BOUND: (self._lebesgue_smoothness_bound, True),
            CheckName.LEBESGUE_MEAN_BOUND: (self._lebesgue_mean_bound, True),
            CheckName.LEBESGUE_SHARP_EXPONENTS: (self._lebesgue_sharp_exponents, True),
            CheckName.THEOREM1_FORWARD: (self._theorem1_forward, True),
            CheckName.THEOREM1_REVERSE: (self._theorem1_reverse, True),
            CheckName.THEOREM_A1_VANISHING: (self._theorem_a1_vanishing, True),
            CheckName.THEOREM2_LITTLE_O: (self._theorem2_little_o, True),
            CheckName.PROPOSITION1_LITTLE_O: (self._proposition1_little_o, True),
            CheckName.GAUGE_POWER: (self._gauge_power, True),
            CheckName.COROLLARY1_BOUNDED: (self._corollary1_bounded, True),
            CheckName.POWER_MEAN_MONOTONE: (self._power_mean_monotone, True),
        }

    @property
    def n(self) -> int:
        return self.scenario.n

    def _dimensions(self) -> List[int]:
        return sorted(set(KERNEL_DIMENSIONS) | {self.n})

    # Scenario-level checks

    def _geometry_identities(self, outcome: CheckOutcome) -> Verdict:
        failed = []
        for dim in self._dimensions():
            rng = stream_generator(self.settings.seed, StreamId.GEOMETRY, dim, 0)
            residuals = identity_residuals(rng, dim, self.scenario.trials.identity)
            for kind in ("involution", "modulus", "symmetry", "triangle"):
                outcome.add_value(f"identity_residual[{kind}]", dim, getattr(residuals, kind))
            if not residuals.passed(self.tol.identity):
                failed.append(dim)
        if failed:
            return CheckStatus.FAIL, f"identity residuals above {self.tol.identity:g} for n in {failed}"
        return CheckStatus.PASS, ""

    def _inclusion_10(self, outcome: CheckOutcome) -> Verdict:
        rng = stream_generator(self.settings.seed, StreamId.GEOMETRY, self.n, 1)
        result = inclusion_trials(rng, self.n, self.scenario.trials.inclusion)
        outcome.add_value("inclusion_counterexamples", result.trials, result.counterexamples)
        if result.counterexamples:
            return CheckStatus.FAIL, f"{result.counterexamples} of {result.trials} trials fall outside the box"
        return CheckStatus.PASS, ""

    def _kernel_quadrature_agreement(self, outcome: CheckOutcome) -> Verdict:
        worst = {}
        for dim in self._dimensions():
            rng = stream_generator(self.settings.seed, StreamId.GEOMETRY, dim, 2)
            radii = np.sort(0.02 + 0.975 * rng.random(self.scenario.trials.kernel_radii))
            closed = GreenKernelParams(dim)
            oracle = GreenKernelParams(dim, EvalPolicy.ADAPTIVE_QUADRATURE)
            errors = [
                abs(little_g(float(r), closed) - little_g_quadrature(float(r), oracle))
                / little_g_quadrature(float(r), oracle)
                for r in radii
            ]
            worst[dim] = max(errors)
            outcome.add_value("kernel_relative_error", dim, worst[dim])
        bad = [dim for dim, err in worst.items() if not err < self.tol.kernel_relative]
        if bad:
            return CheckStatus.FAIL, f"closed form and quadrature disagree for n in {bad}"
        return CheckStatus.PASS, ""

    def _lemma_a_bounds(self, outcome: CheckOutcome) -> Verdict:
        radii = np.concatenate([2.0 ** -np.arange(1, 9), 1.0 - 2.0 ** -np.arange(2, 12)])
        problems = []
        for dim in self._dimensions():
            params = GreenKernelParams(dim)
            asymp = []
            for r in np.sort(radii):
                coords = np.zeros(dim)
                coords[0] = r
                bounds = lemma_a_bounds(Point(coords), params)
                outcome.add_value(f"g_over_lower_bound[n={dim}]", r, bounds.g_value / bounds.lower_bound)
                if not bounds.lower_ok:
                    problems.append(f"lower bound fails at n={dim}, r={r:g}")
                if bounds.upper_ok is False:
                    problems.append(f"upper bound fails at n={dim}, r={r:g}")
                if bounds.asymp_ok is False:
                    problems.append(f"asymptotic ratio out of bracket at n={dim}, r={r:g}")
                if dim > 1 and 2.0**-5 <= r <= 2.0**-2:
                    asymp.append(bounds.asymp_normalized)
                    outcome.add_value(f"asymp_normalized[n={dim}]", r, bounds.asymp_normalized)
            if asymp:
                variation = (max(asymp) - min(asymp)) / max(asymp)
                if not variation < self.tol.asymp_variation:
                    problems.append(f"asymptotic ratio varies by {variation:.3f} at n={dim}")
        if problems:
            return CheckStatus.FAIL, "; ".join(problems)
        return CheckStatus.PASS, ""

    def _lemma1_boundedness(self, outcome: CheckOutcome) -> Verdict:
        ratios = []
        deltas = self.scenario.delta_grid.values
        measures = boundary_test_measures(self.n, self.settings.seed)
        for k, (name, nu) in enumerate(measures.items()):
            for i, delta in enumerate(deltas):
                record = lemma1_check(
                    nu, delta, self.scenario.p, self.sampler, self.settings.budgets, grid_index=k * GRID_STRIDE + i
                )
                if record.budget_exhausted:
                    raise SkipCheck(f"sample budget exhausted for lemma 1 rhs of '{name}' at {delta:g}")
                outcome.add_value(f"lemma1_ratio[{name}]", delta, record.ratio)
                ratios.append(record.ratio)
        ratios = np.array(ratios)
        if not np.all(np.isfinite(ratios)) or np.any(ratios <= 0):
            return CheckStatus.FAIL, "non-finite or zero Lemma 1 ratio"
        spread = float(ratios.max() / ratios.min())
        if not spread < self.tol.lemma1_spread:
            return CheckStatus.FAIL, f"ratio spread {spread:.3g} exceeds {self.tol.lemma1_spread:g}"
        return CheckStatus.PASS, ""

    # Per-measure checks

    def _mean_equals_green(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        mu = self.processor.measures[index][1]
        if not mu.is_radial:
            raise SkipCheck("measure has atoms off the origin, G_mu is not radial")
        series = self.processor.mean_series(index)
        outcome.add_series(_quantity(label, "m_p"), series)
        worst = 0.0
        for s, estimate in series:
            coords = np.zeros(self.n)
            coords[0] = 1.0 - s
            green = potential_at(Point(coords), mu, self.params).value
            outcome.add_value(_quantity(label, "green_potential"), s, green)
            worst = max(worst, abs(estimate.value - green) / green)
        if not worst < self.tol.kernel_relative:
            return CheckStatus.FAIL, f"m_p and G_mu differ by {worst:.3g} (relative)"
        return CheckStatus.PASS, ""

    def _smoothness_fit(self, outcome: CheckOutcome, label: str, index: int, stream=StreamId.SMOOTHNESS) -> GrowthFit:
        series = _require_budget(self.processor.smoothness_series(index, stream), "Lambda_p")
        name = "Lambda_p" if stream == StreamId.SMOOTHNESS else "Lambda_p_reverse"
        outcome.add_series(_quantity(label, name), series)
        return _fit(outcome, _quantity(label, name), series)

    def _mean_fit(self, outcome: CheckOutcome, label: str, index: int) -> GrowthFit:
        series = _require_budget(self.processor.mean_series(index), "m_p")
        outcome.add_series(_quantity(label, "m_p"), series)
        return _fit(outcome, _quantity(label, "m_p"), series)

    def _smoothness_exponent(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        gamma = self.scenario.gamma_expected
        if gamma is None:
            raise SkipCheck("scenario has no gamma_expected")
        slope = self._smoothness_fit(outcome, label, index).slope
        if not abs(slope - gamma) < self.tol.exponent:
            return CheckStatus.FAIL, f"smoothness slope {slope:.3f}, expected {gamma:g}"
        return CheckStatus.PASS, ""

    def _lebesgue_smoothness_bound(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        slope = self._smoothness_fit(outcome, label, index).slope
        bound = self.n + 1 - self.tol.lebesgue_smoothness
        if not slope >= bound:
            return CheckStatus.FAIL, f"smoothness slope {slope:.3f} below {bound:g}"
        return CheckStatus.PASS, ""

    def _lebesgue_mean_bound(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        slope = self._mean_fit(outcome, label, index).slope
        bound = 1.0 - self.tol.lebesgue_mean
        if not slope >= bound:
            return CheckStatus.FAIL, f"mean slope {slope:.3f} below {bound:g}"
        return CheckStatus.PASS, ""

    def _lebesgue_sharp_exponents(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        smooth = self._smoothness_fit(outcome, label, index).slope
        mean = self._mean_fit(outcome, label, index).slope
        problems = []
        if not abs(smooth - (2 * self.n + 1)) < self.tol.sharp_exponent:
            problems.append(f"smoothness slope {smooth:.3f}, expected {2 * self.n + 1}")
        if not abs(mean - self.n) < self.tol.sharp_exponent:
            problems.append(f"mean slope {mean:.3f}, expected {self.n}")
        if problems:
            return CheckStatus.FAIL, "; ".join(problems)
        return CheckStatus.PASS, ""

    def _in_growth_range(self, gamma: float, what: str) -> None:
        if not 0.0 <= gamma < 2 * self.n:
            raise SkipCheck(f"{what} {gamma:.3f} outside [0, {2 * self.n}) where the equivalence holds")

    def _theorem1_forward(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        gamma = self._smoothness_fit(outcome, label, index).slope
        self._in_growth_range(gamma, "measured smoothness exponent")
        slope = self._mean_fit(outcome, label, index).slope
        if not abs(slope - (gamma - self.n)) < self.tol.exponent:
            return CheckStatus.FAIL, f"mean slope {slope:.3f}, smoothness slope {gamma:.3f} predicts {gamma - self.n:.3f}"
        return CheckStatus.PASS, ""

    def _theorem1_reverse(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        slope = self._mean_fit(outcome, label, index).slope
        self._in_growth_range(slope + self.n, "smoothness exponent predicted from the mean slope")
        gamma = self._smoothness_fit(outcome, label, index, StreamId.SMOOTHNESS_REVERSE).slope
        if not abs(gamma - (slope + self.n)) < self.tol.exponent:
            return CheckStatus.FAIL, f"smoothness slope {gamma:.3f}, mean slope {slope:.3f} predicts {slope + self.n:.3f}"
        return CheckStatus.PASS, ""

    def _vanishing(self, outcome: CheckOutcome, quantity: str, points: List[Tuple[float, float]]) -> Optional[str]:
        for abscissa, value in points:
            outcome.add_value(quantity, abscissa, value)
        check = vanishing_check([v for _, v in points])
        if check.passes(self.tol.vanishing_ratio):
            return None
        return f"{quantity} not vanishing (decreasing={check.decreasing}, last/first={check.last_over_first:.3g})"

    def _theorem_a1_vanishing(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        series = _require_budget(self.processor.mean_series(index), "m_p")
        outcome.add_series(_quantity(label, "m_p"), series)
        exponent = self.n * (1.0 - 1.0 / self.scenario.p)
        points = [(s, (s * (2.0 - s)) ** exponent * e.value) for s, e in series]
        problem = self._vanishing(outcome, _quantity(label, "a1_normalized_mean"), points)
        return (CheckStatus.FAIL, problem) if problem else (CheckStatus.PASS, "")

    def _theorem2_little_o(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        p = self.scenario.p
        smooth = _require_budget(self.processor.smoothness_series(index), "Lambda_p")
        mean = _require_budget(self.processor.mean_series(index), "m_p")
        outcome.add_series(_quantity(label, "Lambda_p"), smooth)
        outcome.add_series(_quantity(label, "m_p"), mean)
        problems = [
            self._vanishing(
                outcome,
                _quantity(label, "o_normalized_smoothness"),
                [(d, d ** (-self.n / p) * e.value) for d, e in smooth],
            ),
            self._vanishing(
                outcome,
                _quantity(label, "o_normalized_mean"),
                [(s, s ** (self.n * (1.0 - 1.0 / p)) * e.value) for s, e in mean],
            ),
        ]
        problems = [problem for problem in problems if problem]
        return (CheckStatus.FAIL, "; ".join(problems)) if problems else (CheckStatus.PASS, "")

    def _proposition1_little_o(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        mu = self.processor.measures[index][1]
        if any(d.alpha <= -1.0 for d in mu.densities):
            raise SkipCheck("measure has infinite total mass")
        outcome.add_value(_quantity(label, "total_mass"), 1.0, ball_mass(mu, 1.0))
        series = _require_budget(self.processor.smoothness_series(index, weighted=False), "unweighted Lambda_p")
        outcome.add_series(_quantity(label, "Lambda_p_unweighted"), series)
        points = [(d, d ** (-self.n / self.scenario.p) * e.value) for d, e in series]
        problem = self._vanishing(outcome, _quantity(label, "o_normalized_unweighted"), points)
        return (CheckStatus.FAIL, problem) if problem else (CheckStatus.PASS, "")

    def _gauge_power(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        gamma = self.scenario.gamma_expected
        if gamma is None:
            raise SkipCheck("scenario has no gamma_expected")
        gauge = power_gauge(gamma)
        gauge.validate(self.n)
        mean = _require_budget(self.processor.mean_series(index), "m_p")
        smooth = _require_budget(self.processor.smoothness_series(index), "Lambda_p")
        problems = []
        for direction, series in ((MEAN_SIDE, mean), (SMOOTHNESS_SIDE, smooth)):
            comparison = gauge_compare(
                [(a, e.value) for a, e in series], gauge, direction, self.n, self.tol.gauge_cap
            )
            for (abscissa, _), value in zip(series, comparison.normalized):
                outcome.add_value(_quantity(label, f"gauge_normalized[{direction}]"), abscissa, value)
            if not comparison.bounded:
                problems.append(f"{direction} normalized sequence exceeds the cap by {-comparison.margin:.3g}")
        return (CheckStatus.FAIL, "; ".join(problems)) if problems else (CheckStatus.PASS, "")

    def _corollary1_bounded(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        mean = _require_budget(self.processor.mean_series(index), "m_p")
        smooth = _require_budget(self.processor.smoothness_series(index), "Lambda_p")
        criterion = boundedness_criterion(
            [(s, e.value) for s, e in mean], [(d, e.value) for d, e in smooth], self.n, self.tol.gauge_cap
        )
        for direction, series, comparison in (
            (MEAN_SIDE, mean, criterion.mean),
            (SMOOTHNESS_SIDE, smooth, criterion.smoothness),
        ):
            for (abscissa, _), value in zip(series, comparison.normalized):
                outcome.add_value(_quantity(label, f"bounded_normalized[{direction}]"), abscissa, value)
        if not criterion.agrees:
            return CheckStatus.FAIL, (
                f"m_p bounded={criterion.mean.bounded} but Lambda_p / delta^n bounded={criterion.smoothness.bounded}"
            )
        return CheckStatus.PASS, ""

    def _power_mean_monotone(self, outcome: CheckOutcome, label: str, index: int) -> Verdict:
        mp = _require_budget(self.processor.mean_series(index), "m_p")
        m1 = _require_budget(self.processor.mean_series(index, p=1.0), "m_1")
        outcome.add_series(_quantity(label, "m_p"), mp)
        outcome.add_series(_quantity(label, "m_1"), m1)
        for (s, high), (_, low) in zip(mp, m1):
            slack = self.tol.power_mean_sigmas * math.hypot(high.std_error, low.std_error) + 1e-12 * high.value
            if low.value > high.value + slack:
                return CheckStatus.FAIL, f"m_1 exceeds m_p at 1 - r = {s:g}"
        return CheckStatus.PASS, ""

    # Running

    def _run_check(self, name: str) -> CheckOutcome:
        outcome = CheckOutcome(name)
        method, per_measure = self.registry[CheckName(name)]
        targets = [(label, i) for i, (label, _) in enumerate(self.processor.measures)] if per_measure else [None]
        if per_measure and not targets:
            outcome.status, outcome.reason = CheckStatus.SKIP.value, "scenario lists no measures"
            return outcome
        verdicts: List[Tuple[Optional[str], CheckStatus, str]] = []
        for target in targets:
            try:
                status, reason = method(outcome, *target) if target else method(outcome)
            except SkipCheck as e:
                status, reason = CheckStatus.SKIP, str(e)
            except ValueError as e:
                status, reason = CheckStatus.FAIL, f"{type(e).__name__}: {e}"
            verdicts.append((target[0] if target else None, status, reason))
        worst = max((v[1] for v in verdicts), key=_SEVERITY.get)
        outcome.status = worst.value
        outcome.reason = "; ".join(
            f"{label}: {reason}" if label else reason for label, status, reason in verdicts if reason and status != CheckStatus.PASS
        )
        log = logger.warning if worst == CheckStatus.FAIL else logger.info
        log(f"[{self.scenario.name}] {name} : {outcome.status}{' - ' + outcome.reason if outcome.reason else ''}")
        return outcome

    def effective_config(self) -> Dict[str, Any]:
        config = self.scenario.to_config()
        config["effective"] = {
            "seed": self.settings.seed,
            "budget_scale": self.settings.budget_scale,
            "budgets": asdict(self.settings.budgets),
            "max_workers": self.settings.max_workers,
        }
        return config

    @catch_exceptions
    def execute(self) -> ResultRecord:
        """
        Runs every requested check in order and writes <name>.record.json and <name>.csv.
        """
        time_start = time.time()
        logger.info(f"Starting scenario '{self.scenario.name}' with seed {self.settings.seed} ...")
        measures = self.processor.measures
        logger.info(f"Resolved {len(measures)} measure(s) for '{self.scenario.name}'")
        outcomes = [self._run_check(name) for name in self.scenario.checks]
        elapsed = time.time() - time_start
        record = ResultRecord(self.scenario.name, outcomes, self.effective_config(), elapsed)

        out_dir = self.settings.out_dir
        write_atomically(out_dir / f"{self.scenario.name}.record.json", record.to_json())
        write_atomically(out_dir / f"{self.scenario.name}.csv", table_to_csv(record.table()))
        logger.info(
            f"Scenario '{self.scenario.name}' completed in {elapsed:.2f} seconds : "
            f"{'pass' if record.passed else 'fail'}"
        )
        return record


def run_scenario(
    scenario: Scenario, settings: RunSettings = RunSettings(), app_config: AppConfig = default_app_config
) -> ResultRecord:
    """
    Runs every check of one scenario and writes its record and table to the output directory.
    """
    deps = ScenarioDependencies.build(scenario, settings, app_config)
    return ScenarioOrchestrator(ScenarioProcessor(deps)).execute()


def run_scenarios(
    scenarios: Sequence[Scenario],
    settings: RunSettings = RunSettings(),
    parallel: bool = False,
    app_config: AppConfig = default_app_config,
) -> List[ResultRecord]:
    """
    Runs scenarios in the given order, or concurrently when parallel is set; records keep input order.
    """
    if not parallel or len(scenarios) <= 1:
        return [run_scenario(s, settings, app_config) for s in scenarios]
    with ThreadPoolExecutor(max_workers=len(scenarios)) as executor:
        return list(executor.map(lambda s: run_scenario(s, settings, app_config), scenarios))
