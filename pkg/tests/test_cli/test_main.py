"""
Tests for the command-line interface.
"""

import json
from types import SimpleNamespace
from unittest.mock import MagicMock, patch

import pytest

from fpsteer.cli.main import _overrides, main
from fpsteer.exceptions import (
    ConfigurationError,
    InfeasibleError,
    NumericalError,
    StageError,
)


def run_cli(*argv):
    """Invoke main() with the given arguments."""
    with patch("sys.argv", ["fpsteer", *argv]):
        main()


@pytest.fixture
def fake_run(tmp_path):
    """Pipeline run stopped after the check stage."""
    run = MagicMock()
    run.stages = ["check"]
    run.feasibility = [object(), object()]
    run.plan.horizon = 2
    run.plan.order = 4
    run.output_dir = tmp_path
    return run


class TestOverrides:

    def test_no_flags(self):
        """Nothing is overridden by default."""
        args = SimpleNamespace(seed=None, runs=None, cost=None)
        assert _overrides(args) == {}

    def test_all_flags(self):
        """Flags map onto configuration sections."""
        args = SimpleNamespace(seed=5, runs=100, cost="physical")
        assert _overrides(args) == {
            "simulation.seed": 5,
            "simulation.runs": 100,
            "controller.cost": "physical",
        }


class TestMain:

    def test_no_command(self, capsys):
        """Without a subcommand the help is printed."""
        with pytest.raises(SystemExit) as excinfo:
            run_cli()
        assert excinfo.value.code == 1
        assert "check" in capsys.readouterr().out

    def test_check(self, mocker, fake_run, capsys):
        """The check subcommand stops after the check stage."""
        mocker.patch("fpsteer.cli.main.load_scenario", return_value=MagicMock())
        pipeline = mocker.patch("fpsteer.cli.main.run_pipeline", return_value=fake_run)
        run_cli("check", "--scenario", "example1")
        assert pipeline.call_args.kwargs["stage"] == "check"
        assert pipeline.call_args.kwargs["overrides"] == {}
        out = capsys.readouterr().out
        assert "All 2 steps reachable" in out
        assert "Output directory" in out

    def test_all_with_flags(self, mocker, fake_run):
        """'all' runs through the report stage with command-line overrides."""
        mocker.patch("fpsteer.cli.main.load_scenario", return_value=MagicMock())
        pipeline = mocker.patch("fpsteer.cli.main.run_pipeline", return_value=fake_run)
        run_cli(
            "all",
            "--scenario",
            "example1",
            "--seed",
            "7",
            "--runs",
            "50",
            "--cost",
            "physical",
            "--out",
            "results",
        )
        kwargs = pipeline.call_args.kwargs
        assert kwargs["stage"] == "report"
        assert kwargs["output_dir"] == "results"
        assert kwargs["overrides"] == {
            "simulation.seed": 7,
            "simulation.runs": 50,
            "controller.cost": "physical",
        }

    def test_list_scenarios(self, capsys):
        """The bundled scenarios are listed by name."""
        run_cli("list-scenarios")
        out = capsys.readouterr().out
        assert "2 bundled scenarios" in out
        assert "- example1" in out
        assert "- example2" in out

    def test_missing_scenario_flag(self):
        """--scenario is required."""
        with pytest.raises(SystemExit) as excinfo:
            run_cli("solve")
        assert excinfo.value.code == 2

    def test_unknown_cost(self):
        """Only the two cost variants are accepted."""
        with pytest.raises(SystemExit) as excinfo:
            run_cli("solve", "--scenario", "example1", "--cost", "energy")
        assert excinfo.value.code == 2

    @pytest.mark.parametrize(
        "error, code",
        [
            (StageError("check", InfeasibleError("step 3 unreachable")), 3),
            (StageError("solve", NumericalError("no convergence")), 4),
            (ConfigurationError("bad value", field="horizon"), 2),
            (RuntimeError("unexpected"), 4),
        ],
    )
    def test_exit_codes(self, mocker, capsys, error, code):
        """Errors map to their exit codes."""
        mocker.patch("fpsteer.cli.main.load_scenario", return_value=MagicMock())
        mocker.patch("fpsteer.cli.main.run_pipeline", side_effect=error)
        with pytest.raises(SystemExit) as excinfo:
            run_cli("all", "--scenario", "example1")
        assert excinfo.value.code == code
        assert "Error" in capsys.readouterr().out

    def test_missing_scenario_file(self, tmp_path):
        """Unknown scenario files exit with the configuration code."""
        with pytest.raises(SystemExit) as excinfo:
            run_cli("check", "--scenario", str(tmp_path / "nowhere.json"))
        assert excinfo.value.code == 2

    def test_end_to_end(self, shift_scenario, tmp_path, capsys):
        """A scenario file runs through every stage."""
        path = tmp_path / "shift.json"
        path.write_text(json.dumps(shift_scenario.to_dict()))
        out_dir = tmp_path / "out"
        run_cli("all", "--scenario", str(path), "--runs", "300", "--out", str(out_dir))
        assert (out_dir / "report.json").exists()
        out = capsys.readouterr().out
        assert "Terminal moments" in out
        assert "m4" in out
