"""
End-to-End Workflow Tests

Tests that chain the command-line subcommands the way a user would:
- Simulate a scenario, then verify the written trace
- Detect a tampered trace during verification
- Monitor a simulated trace in both semantics
- Determinize the mission and compare against reference thresholds
- Simulate the full mission and verify its trace
"""

import json

import numpy as np
import pytest

from ristl.cli import EXIT_OK, EXIT_VIOLATION, RistlCLI, main
from ristl.logging_setup import configure_logging
from ristl.sim import COL
from ristl.utils import TRACE_COLUMNS, read_trace_table, summary_path, write_trace
from tests.test_base import ScenarioTestMixin


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    configure_logging("warning")


class TestEndToEndWorkflows(ScenarioTestMixin):
    """Test complete workflows across subcommands."""

    def test_simulate_then_verify(self, tmp_path):
        """Test that a freshly simulated trace passes every verification check."""
        path, _ = self._reach_scenario(tmp_path, hold_only=True)
        trace = tmp_path / "hold.csv"

        # Step 1: simulate
        assert main(["simulate", "--spec", str(path), "--out", str(trace)]) == EXIT_OK
        summary = json.loads(summary_path(trace).read_text())
        assert summary["success"]

        # Step 2: verify the written trace
        report_path = tmp_path / "verify.json"
        assert main(["verify", "--spec", str(path), "--trace", str(trace), "--out", str(report_path)]) == EXIT_OK
        report = json.loads(report_path.read_text())
        checks = report["checks"]
        for name in ("diffeo", "barrier_consistency", "invariance", "eps_r", "r_bound", "soundness_chain"):
            assert checks[name]["ok"], name
        assert checks["eps_r"]["value"] == pytest.approx(summary["eps_r"], abs=1e-6)

    def test_tampered_trace_fails_verification(self, tmp_path):
        """Test that moving the robot out of the corridor is caught."""
        path, _ = self._reach_scenario(tmp_path, hold_only=True)
        trace = tmp_path / "hold.csv"
        cli = RistlCLI()
        cli.simulate(str(path), str(trace))

        # Step 1: shift one row upward, keeping x and p consistent
        table = read_trace_table(trace)
        table[150, COL["x2"]] += 1.8
        table[150, COL["p2"]] += 1.8
        write_trace(trace, table, TRACE_COLUMNS)

        # Step 2: verify
        report = cli.verify(str(path), str(trace))
        assert report["exit_code"] == EXIT_VIOLATION
        checks = report["checks"]
        assert checks["diffeo"]["ok"]
        assert not checks["barrier_consistency"]["ok"]
        assert not checks["invariance"]["ok"]
        assert checks["invariance"]["first_violation"] == 150
        assert checks["invariance"]["subtask"] == 1

    def test_monitor_simulated_trace(self, tmp_path):
        """Test that the simulated trace satisfies the corridor formula in both semantics."""
        path, _ = self._reach_scenario(tmp_path, hold_only=True)
        trace = tmp_path / "hold.csv"
        cli = RistlCLI()
        cli.simulate(str(path), str(trace))

        report = cli.monitor(str(path), str(trace), mode="both")
        assert report["exit_code"] == EXIT_OK
        assert report["stochastic"]["value"] > 0.0
        assert report["deterministic"]["value"] > 0.0

    def test_mission_thresholds_against_references(self, scenario_dir, tmp_path):
        """Test the mission determinization with both covariance readings."""
        out = tmp_path / "mission.json"
        assert main(["determinize", "--spec", str(scenario_dir / "mission.toml"), "--out", str(out)]) == EXIT_OK
        report = json.loads(out.read_text())
        wall = report["reference_comparison"]["mu3"]
        assert wall["computed"] == pytest.approx(0.17550, abs=1e-3)
        assert wall["reference"] == 0.85
        # Diagonal entries read as variances widen sigma by sqrt(10).
        assert wall["variance_reading"] == pytest.approx(0.17550 * np.sqrt(10.0), abs=1e-3)
        goal = report["reference_comparison"]["mu2"]
        assert goal["computed"] == pytest.approx(goal["reference"], abs=0.01)

    def test_mission_simulate_then_verify(self, scenario_dir, tmp_path):
        """Test the closed-loop mission end to end: simulate, then verify the trace."""
        spec = str(scenario_dir / "mission.toml")
        trace = tmp_path / "mission.csv"

        # Step 1: simulate all six subtasks
        assert main(["simulate", "--spec", spec, "--out", str(trace), "--emit-plot-data"]) == EXIT_OK
        summary = json.loads(summary_path(trace).read_text())
        assert summary["success"] and summary["invariance_ok"]
        assert [s["status"] for s in summary["subtasks"]] == ["succeeded"] * 6
        assert summary["eps_r"] > 0.0

        # Step 2: verify the written trace
        report_path = tmp_path / "verify.json"
        assert main(["verify", "--spec", spec, "--trace", str(trace), "--out", str(report_path)]) == EXIT_OK
        checks = json.loads(report_path.read_text())["checks"]
        for name in ("diffeo", "barrier_consistency", "invariance", "eps_r", "r_bound", "soundness_chain"):
            assert checks[name]["ok"], name
        assert checks["eps_r"]["value"] == pytest.approx(summary["eps_r"], abs=1e-6)
