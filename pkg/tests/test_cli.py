import pytest
from click.testing import CliRunner

from src.cli import EXIT_CHECK_FAILED, EXIT_INVALID_INPUT, EXIT_OK, cli
from src.utils.report import REPORT_FILENAME
from src.utils.orchestrator import RESULT_COLUMNS

SCENARIO = """\
name: {name}
measures:
  - builtin:atom-origin
dimension: 2
p: {p}
r_grid: {{first_exponent: 2, last_exponent: 6}}
tolerances: {{vanishing_ratio: {ratio}}}
checks:
  - mean_equals_green
  - theorem_a1_vanishing
"""


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def write_scenario(tmp_path, name="cli-origin", p=1.25, ratio=0.5):
    path = tmp_path / f"{name}.yaml"
    path.write_text(SCENARIO.format(name=name, p=p, ratio=ratio))
    return path


def test_list(runner):
    result = runner.invoke(cli, ["list"])
    assert result.exit_code == EXIT_OK
    assert "atom-origin" in result.output
    assert "prop1-suite" in result.output


def test_run_passing_scenario(runner, tmp_path):
    path = write_scenario(tmp_path)
    out = tmp_path / "out"
    result = runner.invoke(cli, ["run", str(path), "--seed", "3", "--out-dir", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    assert "cli-origin: pass" in result.output
    assert (out / "cli-origin.record.json").is_file()
    assert (out / "cli-origin.csv").is_file()


def test_run_failing_check_exits_with_one(runner, tmp_path):
    path = write_scenario(tmp_path, ratio="1.0e-30")
    result = runner.invoke(cli, ["run", str(path), "--out-dir", str(tmp_path / "out")])
    assert result.exit_code == EXIT_CHECK_FAILED
    assert "cli-origin: fail" in result.output


def test_run_inadmissible_p_exits_with_two(runner, tmp_path):
    path = write_scenario(tmp_path, p=1.6)
    result = runner.invoke(cli, ["run", str(path), "--out-dir", str(tmp_path / "out")])
    assert result.exit_code == EXIT_INVALID_INPUT
    assert "error:" in result.output
    assert not (tmp_path / "out" / "cli-origin.record.json").exists()


def test_run_override_accepts_p_outside_the_range(runner, tmp_path):
    path = write_scenario(tmp_path, p=1.6)
    result = runner.invoke(
        cli, ["run", str(path), "--override-p-range", "--out-dir", str(tmp_path / "out")]
    )
    assert result.exit_code == EXIT_OK, result.output


def test_run_unknown_scenario_exits_with_two(runner, tmp_path):
    result = runner.invoke(cli, ["run", "no-such-scenario", "--out-dir", str(tmp_path)])
    assert result.exit_code == EXIT_INVALID_INPUT
    assert "Unknown scenario" in result.output


def test_run_rejects_a_negative_seed(runner, tmp_path):
    path = write_scenario(tmp_path)
    result = runner.invoke(cli, ["run", str(path), "--seed", "-1"])
    assert result.exit_code == 2


def test_report(runner, tmp_path):
    out = tmp_path / "out"
    runner.invoke(cli, ["run", str(write_scenario(tmp_path)), "--out-dir", str(out)])
    result = runner.invoke(cli, ["report", str(out / "cli-origin.record.json"), "--out-dir", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    assert "== cli-origin : pass" in result.output
    assert (out / REPORT_FILENAME).read_text().startswith(",".join(RESULT_COLUMNS))


def test_empty_report(runner, tmp_path):
    result = runner.invoke(cli, ["report", "--out-dir", str(tmp_path)])
    assert result.exit_code == EXIT_OK
    assert (tmp_path / REPORT_FILENAME).read_text() == ",".join(RESULT_COLUMNS) + "\n"
