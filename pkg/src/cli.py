import sys
import click
from pathlib import Path
from typing import Optional, Tuple
from src.config.app import app_config
from src.config.logger import LoggerConfig, logger
from src.config.scenarios import find_scenario, list_scenarios
from src.utils.orchestrator import RunSettings, run_scenarios
from src.utils.report import emit_report, load_records


EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INVALID_INPUT = 2


def _configure_logging(level: Optional[str]) -> None:
    level = (level or app_config.run_defaults().log_level).upper()
    LoggerConfig(app_config, level).configure_logging()


@click.group()
def cli() -> None:
    """
    Desk-scale verification of growth theorems for invariant Green potentials on the unit ball.
    """


@cli.command()
@click.argument("targets", nargs=-1, required=True)
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Master seed (overrides scenario and SEED).")
@click.option("--budget-scale", type=click.FloatRange(min=0, min_open=True), default=None, help="Multiplier for sample budgets.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory.")
@click.option("--override-p-range", is_flag=True, help="Accept any p > 0.")
@click.option("--parallel", is_flag=True, help="Run scenarios concurrently.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False), default=None)
def run(
    targets: Tuple[str, ...],
    seed: Optional[int],
    budget_scale: Optional[float],
    out_dir: Optional[Path],
    override_p_range: bool,
    parallel: bool,
    log_level: Optional[str],
) -> None:
    """
    Runs scenarios given by catalog name or document path.
    """
    _configure_logging(log_level)
    try:
        scenarios = [find_scenario(t, override_p_range) for t in targets]
        settings = RunSettings(seed=seed, budget_scale=budget_scale, out_dir=out_dir, override_p_range=override_p_range)
        records = run_scenarios(scenarios, settings, parallel=parallel)
    except ValueError as e:
        logger.error(str(e))
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID_INPUT)
    for record in records:
        click.echo(f"{record.scenario}: {'pass' if record.passed else 'fail'}")
    sys.exit(EXIT_OK if all(r.passed for r in records) else EXIT_CHECK_FAILED)


@cli.command("list")
def list_command() -> None:
    """
    Lists the shipped scenarios.
    """
    try:
        summaries = list_scenarios()
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID_INPUT)
    for s in summaries:
        click.echo(f"{s.name:<22} n={s.n} p={s.p:g}  checks: {', '.join(s.checks)}")


@cli.command()
@click.argument("records", nargs=-1, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Where report.csv goes.")
def report(records: Tuple[Path, ...], out_dir: Optional[Path]) -> None:
    """
    Combines result records into report.csv and prints one summary block per scenario.
    """
    try:
        loaded = load_records(records)
        summary = emit_report(loaded, out_dir or app_config.results_dir())
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_INVALID_INPUT)
    if summary:
        click.echo(summary)
    sys.exit(EXIT_OK if all(r.passed for r in loaded) else EXIT_CHECK_FAILED)
