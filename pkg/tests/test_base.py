"""
Base Test Class with Scenario Utilities

This module provides a mixin that builds small environments, predicates and
scenario files for tests, so individual tests only state what differs.
"""

import textwrap
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ristl.monitor import Trajectory
from ristl.scenario import load_scenario
from ristl.stochastics import AffinePredicate, GaussianVector, NormBallPredicate, RiskPredicate, RiskSpec

# Planar reach task: goal disc of radius 1 around (3, 0), corridor y <= 1.5.
REACH_SCENARIO = """
name = "{name}"
seed = 3

[gaussian]
mean = [3.0, 0.0]
diagonal = [0.01, 0.01]

[[predicate]]
id = "goal"
family = "norm_ball"
selector = [0, 1]
epsilon = 1.0
risk = "chance"
delta = 0.5

[[predicate]]
id = "corridor"
family = "affine"
v = [0.0, -1.0]
w = [0.0, 0.0]
b0 = 1.5
risk = "ev"
gamma = 0.0

[formula]
text = "{formula}"

{subtasks}

[dynamics]
bound = {bound}

[controller]
law = "{law}"
barrier_gain = {gain}

[integrator]
dt = {dt}

[domain]
lower = [-2.0, -2.0]
upper = [5.0, 2.0]

[initial]
x = [{x0}, 0.0]
theta = 0.0
"""

REACH_SUBTASK = """
[[subtask]]
name = "reach_goal"
invariant = ["corridor"]
reach = ["goal"]
deadline = {deadline}
"""

HOLD_SUBTASK = """
[[subtask]]
name = "hold_corridor"
invariant = ["corridor"]
reach = []
deadline = {deadline}
"""


class ScenarioTestMixin:
    """Mixin class that provides scenario and predicate builders."""

    def _gaussian(self, mean: Sequence[float], diagonal: Sequence[float]) -> GaussianVector:
        return GaussianVector.from_diagonal(mean, diagonal)

    def _affine(self, pid: str, v, w, b0: float, spec: RiskSpec) -> RiskPredicate:
        return RiskPredicate(pid, AffinePredicate(np.asarray(v, dtype=float), np.asarray(w, dtype=float), b0), spec)

    def _ball(self, pid: str, selector, epsilon: float, spec: RiskSpec) -> RiskPredicate:
        return RiskPredicate(pid, NormBallPredicate(tuple(selector), epsilon), spec)

    def _example2_predicate(self, spec: RiskSpec) -> RiskPredicate:
        """h(x, X) = X - x in one dimension."""
        return self._affine("mu", [-1.0], [1.0], 0.0, spec)

    def _trajectory(self, states, dt: float = 1.0) -> Trajectory:
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        return Trajectory(np.arange(len(states)) * dt, states)

    def _write_scenario(self, directory: Path, text: str, name: str = "scenario.toml") -> Path:
        path = Path(directory) / name
        path.write_text(textwrap.dedent(text), encoding="utf-8")
        return path

    def _reach_scenario_text(
        self,
        name: str = "reach",
        deadline: float = 3.0,
        hold_only: bool = False,
        law: str = "slack",
        bound: float = 0.0,
        gain: float = 1.0,
        dt: float = 0.01,
        x0: float = 0.0,
        formula: Optional[str] = None,
    ) -> str:
        block = (HOLD_SUBTASK if hold_only else REACH_SUBTASK).format(deadline=deadline)
        if formula is None:
            formula = f"G[0,{deadline:g}](corridor)" if hold_only else f"F[0,{deadline:g}](goal) & G[0,{deadline:g}](corridor)"
        return REACH_SCENARIO.format(
            name=name, formula=formula, subtasks=block, law=law, bound=bound, gain=gain, dt=dt, x0=x0
        )

    def _reach_scenario(self, directory: Path, **kwargs):
        path = self._write_scenario(directory, self._reach_scenario_text(**kwargs), "reach.toml")
        return path, load_scenario(path)
