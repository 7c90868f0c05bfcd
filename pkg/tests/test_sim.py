"""
Simulation Tests

Integrator, disturbances, single-subtask runs on the planar reach scenario,
deadline and divergence stress cases and the full mission with its noise sweep.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from ristl.control import UnicycleState
from ristl.errors import DivergenceError, RistlError, ScenarioError
from ristl.scenario import load_scenario
from ristl.sim import (
    COL,
    BoundedNoise,
    ConstantDisturbance,
    Dynamics,
    SaturatedSpring,
    determinize_scenario,
    disturbance_sweep,
    invariance_floor,
    robustness_values,
    run_scenario,
    step,
    step_count,
)
from tests.test_base import ScenarioTestMixin


class TestIntegrator:
    """Test the RK4 step with zero-order hold."""

    def test_straight_line(self):
        """Test forward motion at unit speed."""
        z = step(UnicycleState(np.zeros(2), 0.0), [1.0, 0.0], 0.0, 0.1, Dynamics())
        assert z.x == pytest.approx([0.1, 0.0])
        assert z.theta == pytest.approx(0.0)

    def test_turn_in_place(self):
        """Test that the angular input only rotates the heading."""
        z = step(UnicycleState(np.array([1.0, 1.0]), 0.0), [0.0, 2.0], 0.0, 0.1, Dynamics())
        assert z.x == pytest.approx([1.0, 1.0])
        assert z.theta == pytest.approx(0.2)

    def test_arc(self):
        """Test a quarter circle of radius one against the exact endpoint."""
        z = UnicycleState(np.zeros(2), 0.0)
        dt = 0.01
        n = int(round(0.5 * math.pi / dt))
        for k in range(n):
            z = step(z, [1.0, 1.0], k * dt, dt, Dynamics())
        end = n * dt
        assert z.x == pytest.approx([math.sin(end), 1.0 - math.cos(end)], abs=1e-8)

    def test_drift_and_disturbance(self):
        """Test that drift and a constant disturbance add to the velocity."""
        dynamics = Dynamics(drift_x=(0.5, 0.0), disturbance=ConstantDisturbance((0.0, 0.2)), bound=1.0)
        z = step(UnicycleState(np.zeros(2), 0.0), [0.0, 0.0], 0.0, 1.0, dynamics)
        assert z.x == pytest.approx([0.5, 0.2])

    def test_rejects_nonpositive_step(self):
        """Test that dt must be positive."""
        with pytest.raises(RistlError):
            step(UnicycleState(np.zeros(2), 0.0), [0.0, 0.0], 0.0, 0.0, Dynamics())

    def test_step_count(self):
        """Test the number of whole steps before a deadline."""
        assert step_count(0.0, 3.0, 0.01) == 300
        assert step_count(0.0, 0.004, 0.01) == 0
        assert step_count(1.5, 3.0, 0.01) == 150


class TestDisturbances:
    """Test disturbance models and their bounds."""

    def test_norm_clipping(self):
        """Test that a disturbance above the bound is scaled onto it."""
        dynamics = Dynamics(disturbance=ConstantDisturbance((3.0, 4.0)), bound=0.5)
        assert dynamics.disturbance_at(np.zeros(2), 0.0, 0) == pytest.approx([0.3, 0.4])
        assert dynamics.effective_bound == pytest.approx(0.5)

    def test_component_clipping(self):
        """Test the per-coordinate reading of the bound."""
        dynamics = Dynamics(disturbance=ConstantDisturbance((3.0, -0.1)), bound=0.5, bound_reading="component")
        assert dynamics.disturbance_at(np.zeros(2), 0.0, 0) == pytest.approx([0.5, -0.1])
        assert dynamics.effective_bound == pytest.approx(0.5 * math.sqrt(2.0))

    def test_saturated_spring(self):
        """Test the pull toward the origin with saturation."""
        spring = SaturatedSpring(0.5)
        assert spring(np.array([3.0, -0.4]), 0.0, 0) == pytest.approx([-0.5, 0.2])

    def test_bounded_noise(self):
        """Test reproducibility and the magnitude bound."""
        noise = BoundedNoise(0.3, seed=5)
        first = [noise(np.zeros(2), 0.0, k) for k in range(50)]
        again = [noise(np.zeros(2), 0.0, k) for k in range(50)]
        assert all(np.array_equal(a, b) for a, b in zip(first, again))
        assert all(np.linalg.norm(c) <= 0.3 for c in first)
        assert not np.array_equal(first[0], BoundedNoise(0.3, seed=6)(np.zeros(2), 0.0, 0))


class TestInvarianceFloor:
    """Test the lowest admissible barrier value."""

    def test_slack_floor(self):
        """Test min(b(p0), eps_r / alpha) - tol."""
        assert invariance_floor(0.5, 0.2, 2.0, 0.1) == pytest.approx(0.0)
        assert invariance_floor(0.05, 0.2, 2.0, 0.1) == pytest.approx(-0.05)

    def test_min_norm_floor(self):
        """Test that the hard law only needs b >= -tol."""
        assert invariance_floor(0.5, None, 2.0, 0.1) == pytest.approx(-0.1)


class TestReachScenario(ScenarioTestMixin):
    """Test single-subtask runs of the planar reach scenario."""

    def test_hold_corridor(self, tmp_path):
        """Test that holding the corridor succeeds with a positive slack."""
        _, scenario = self._reach_scenario(tmp_path, hold_only=True)
        result = run_scenario(scenario)
        assert result.success
        assert result.invariance_ok
        assert result.eps_r > 0.0
        assert result.trajectory.shape == (301, len(COL))
        assert result.trajectory[-1, COL["t"]] == pytest.approx(3.0)
        assert result.r_bound is not None

    def test_hold_corridor_summary(self, tmp_path):
        """Test the summary fields of a successful run."""
        _, scenario = self._reach_scenario(tmp_path, hold_only=True)
        summary = run_scenario(scenario).to_summary()
        assert summary["failing_subtask"] is None
        assert summary["subtasks"][0]["name"] == "hold_corridor"
        assert summary["l"] == pytest.approx(0.1)
        assert summary["tol_num"] == pytest.approx(0.1)
        assert summary["diffeo_margin_ok"]

    def test_start_inside_goal(self, tmp_path):
        """Test that a start inside the reach set needs no control."""
        _, scenario = self._reach_scenario(tmp_path, law="min_norm", x0=3.0)
        result = run_scenario(scenario)
        assert result.success
        assert np.allclose(result.trajectory[:, COL["u1"]], 0.0)
        assert np.allclose(result.trajectory[:, COL["u2"]], 0.0)
        assert result.eps_r is None

    def test_disturbance_sweep(self, tmp_path):
        """Test that reaching the goal survives bounded noise for every seed."""
        _, scenario = self._reach_scenario(tmp_path, bound=0.2, gain=4.0)
        seeds = list(range(1, 11))
        summary = disturbance_sweep(scenario, seeds)
        assert [run["seed"] for run in summary["runs"]] == seeds
        assert summary["all_succeeded"]
        assert summary["all_invariant"]
        assert all(run["eps_r"] is not None and run["eps_r"] >= 0.0 for run in summary["runs"])
        assert summary["min_eps_r"] >= 0.0

    def test_noise_changes_the_run(self, tmp_path):
        """Test that different seeds drive different trajectories."""
        _, scenario = self._reach_scenario(tmp_path, bound=0.2, gain=4.0)
        runs = [
            run_scenario(replace(scenario, dynamics=replace(scenario.dynamics, disturbance=BoundedNoise(0.2, seed))))
            for seed in (1, 2)
        ]
        assert all(run.success and run.invariance_ok for run in runs)
        assert not np.allclose(runs[0].trajectory[:, COL["x2"]], runs[1].trajectory[:, COL["x2"]])

    def test_run_capped_at_t_end(self, tmp_path):
        """Test that a run never starts a subtask ending after t_end."""
        _, scenario = self._reach_scenario(tmp_path, hold_only=True)
        short = replace(scenario, integrator=replace(scenario.integrator, t_end=2.0))
        with pytest.raises(ScenarioError) as exc:
            run_scenario(short)
        assert exc.value.detail["location"] == "integrator.t_end"


class TestStressScenarios:
    """Test the shipped failure scenarios."""

    def test_deadline_shorter_than_step(self, scenario_dir):
        """Test that a zero-step subtask fails without robustness values."""
        scenario = load_scenario(scenario_dir / "deadline_stress.toml")
        result = run_scenario(scenario)
        assert not result.success
        assert result.failing_subtask == 1
        assert result.subtasks[0]["steps"] == 0
        assert result.trajectory.shape[0] == 1
        assert result.robustness["stochastic"] is None

    def test_unbounded_disturbance_diverges(self, scenario_dir):
        """Test that an absurd disturbance bound is reported as divergence."""
        scenario = load_scenario(scenario_dir / "infeasible_bound.toml")
        with pytest.raises(DivergenceError):
            run_scenario(scenario)


class TestMission:
    """Test the unicycle mission around the uncertain obstacle."""

    def test_first_subtask(self, mission_scenario, mission_determinization):
        """Test that the robot gets below the obstacle on time."""
        scenario = replace(mission_scenario, subtasks=mission_scenario.subtasks[:1])
        result = run_scenario(scenario, mission_determinization)
        status = result.subtasks[0]
        assert status["name"] == "down_left_of_obstacle"
        assert status["status"] == "succeeded"
        assert result.eps_r > 0.0
        assert result.trajectory[-1, COL["t"]] == pytest.approx(3.0)
        assert result.l == pytest.approx(0.4)

    def test_full_mission(self, mission_run):
        """Test that all six subtasks succeed with a positive slack."""
        assert [s["status"] for s in mission_run.subtasks] == ["succeeded"] * 6
        assert mission_run.success
        assert mission_run.invariance_ok
        assert mission_run.eps_r > 0.0
        for status in mission_run.subtasks:
            assert status["eps_r"] > 0.0, status["name"]
            assert status["b_min"] >= status["invariance_floor"], status["name"]
            assert status["reached"], status["name"]
        assert mission_run.alphas == pytest.approx([4.0] * 6)
        assert mission_run.trajectory[-1, COL["t"]] == pytest.approx(18.0)
        assert mission_run.diffeo_margin_ok
        assert mission_run.r_bound is not None

    def test_mission_visits_both_regions(self, mission_run):
        """Test that the robot ends the third and sixth legs inside R1 and R2."""
        times = mission_run.trajectory[:, COL["t"]]
        p = mission_run.trajectory[:, [COL["p1"], COL["p2"]]]
        assert np.linalg.norm(p[np.argmin(np.abs(times - 10.0))] - [8.0, 9.0]) < 0.4
        assert np.linalg.norm(p[-1] - [2.0, 9.0]) < 0.4
        # wall O1 at y = 10
        assert np.all(mission_run.trajectory[:, COL["x2"]] < 10.0)

    def test_mission_soundness_chain(self, mission_run):
        """Test that phi bar >= 0 implies phi >= 0 implies the RiSTL formula holds."""
        values = mission_run.robustness
        assert all(values[key] is not None for key in ("phi_bar", "phi", "stochastic"))
        if values["phi_bar"] >= 0.0:
            assert values["phi"] >= 0.0
        if values["phi"] >= 0.0:
            assert values["stochastic"] >= 0.0

    def test_mission_disturbance_sweep(self, mission_scenario):
        """Test the mission under bounded noise over twenty seeds."""
        summary = disturbance_sweep(mission_scenario, list(range(1, 21)))
        failures = [run for run in summary["runs"] if not (run["success"] and run["invariance_ok"])]
        assert not failures
        assert summary["all_succeeded"]
        assert summary["all_invariant"]
        assert summary["min_eps_r"] > 0.0

    def test_run_stops_at_t_end(self, mission_scenario, mission_determinization):
        """Test that subtasks ending after t_end are skipped rather than simulated."""
        capped = replace(
            mission_scenario,
            subtasks=mission_scenario.subtasks[:2],
            integrator=replace(mission_scenario.integrator, t_end=4.0),
        )
        result = run_scenario(capped, mission_determinization)
        assert result.subtasks[0]["status"] == "succeeded"
        assert result.subtasks[1]["status"] == "skipped"
        assert result.subtasks[1]["reason"] == "after t_end"
        assert result.trajectory[-1, COL["t"]] == pytest.approx(3.0)
        assert not result.success

    def test_thresholds_reused(self, mission_scenario, mission_determinization):
        """Test that the determinization is computed from the scenario alone."""
        again = determinize_scenario(replace(mission_scenario, subtasks=mission_scenario.subtasks[:1]))
        for pid in ("mu3", "mu4", "mu7"):
            assert again.thresholds[pid] == pytest.approx(mission_determinization.thresholds[pid], abs=1e-6)


MISSION_WAYPOINTS = (
    (0.0, 2.5, 8.0),
    (2.0, 2.5, 6.0),
    (5.0, 8.0, 6.0),
    (7.0, 8.0, 9.0),
    (10.0, 8.0, 9.0),
    (12.0, 8.0, 6.0),
    (14.0, 2.0, 6.0),
    (17.0, 2.0, 9.0),
    (18.0, 2.0, 9.0),
)


class TestMissionSoundness:
    """Test the chain phi bar >= 0 => phi >= 0 => RiSTL on synthetic mission traces."""

    def _traces(self, rng, noise: float, l: float):
        times = np.round(np.arange(0.0, 18.0 + 1e-9, 0.05), 10)
        waypoints = np.array(MISSION_WAYPOINTS)
        p = np.stack([np.interp(times, waypoints[:, 0], waypoints[:, k]) for k in (1, 2)], axis=-1)
        p = p + rng.uniform(-noise, noise, size=p.shape)
        theta = rng.uniform(-math.pi, math.pi, size=len(times))
        x = p - l * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return times, x, p

    def test_route_satisfies_every_level(self, mission_scenario, mission_determinization):
        """Test that a slightly perturbed route around the obstacle satisfies all three formulas."""
        rng = np.random.default_rng(31)
        for _ in range(10):
            times, x, p = self._traces(rng, 0.05, mission_scenario.controller.l)
            values = robustness_values(mission_scenario, mission_determinization, times, x, p)
            assert values["phi_bar"] >= 0.0
            assert values["phi"] >= 0.0
            assert values["stochastic"] >= 0.0

    def test_chain_under_heavy_perturbation(self, mission_scenario, mission_determinization):
        """Test the implications on 1000 routes perturbed by up to 0.8 in each coordinate."""
        rng = np.random.default_rng(32)
        for _ in range(1000):
            times, x, p = self._traces(rng, float(rng.uniform(0.0, 0.8)), mission_scenario.controller.l)
            values = robustness_values(mission_scenario, mission_determinization, times, x, p)
            if values["phi_bar"] >= 0.0:
                assert values["phi"] >= 0.0
            if values["phi"] >= 0.0:
                assert values["stochastic"] >= 0.0
