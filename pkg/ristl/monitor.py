"""
Robustness monitor

Quantitative semantics of RiSTL formulas over sampled trajectories, either
stochastically (chance / risk margins under the Gaussian environment) or
deterministically (h(x, mean) - threshold for determinized leaves).

Window extremes are taken over trace samples, with interval endpoints
snapped to the nearest sample.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from loguru import logger

from .errors import HorizonError, TraceError, UnknownPredicateError
from .logic import (
    And,
    Always,
    Eventually,
    Formula,
    Not,
    Or,
    Predicate,
    TrueF,
    Until,
    format_formula,
    horizon,
    walk,
)
from .stochastics import AUTO, EvaluationMethod, GaussianVector, PredicateFunction, RiskPredicate, risk_value

SNAP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled signal: times (K,), states (K, n) and optional extra columns."""

    times: np.ndarray
    states: np.ndarray
    extras: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).ravel()
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if times.size == 0:
            raise TraceError("trajectory has no samples")
        if states.shape[0] != times.size:
            raise TraceError(f"{times.size} times but {states.shape[0]} states")
        if np.any(np.diff(times) <= 0.0):
            raise TraceError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def step(self) -> float:
        return float(np.median(np.diff(self.times))) if len(self) > 1 else 0.0

    def subsample(self, every: int) -> "Trajectory":
        """Every ``every``-th sample, always keeping the last one."""
        index = list(range(0, len(self), every))
        if index[-1] != len(self) - 1:
            index.append(len(self) - 1)
        extras = {key: value[index] for key, value in self.extras.items()}
        return Trajectory(self.times[index], self.states[index], extras)

    def with_states(self, states: np.ndarray) -> "Trajectory":
        return Trajectory(self.times, states, self.extras)

    @classmethod
    def from_csv(cls, path: str) -> "Trajectory":
        """Read a trace with header ``t,x1,x2[,...]``; x-columns become states."""
        try:
            data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
        except (OSError, ValueError) as e:
            raise TraceError(f"cannot read trace {path}: {e}") from e
        data = np.atleast_1d(data)
        names = list(data.dtype.names or ())
        if "t" not in names:
            raise TraceError(f"trace {path} has no 't' column")
        state_cols = sorted(
            (name for name in names if name.startswith("x") and name[1:].isdigit()),
            key=lambda name: int(name[1:]),
        )
        if not state_cols:
            raise TraceError(f"trace {path} has no state columns x1, x2, ...")
        states = np.column_stack([data[name] for name in state_cols])
        extras = {name: np.asarray(data[name]) for name in names if name != "t" and name not in state_cols}
        logger.debug(f"Loaded trace {path} with {data.size} samples and columns {names}")
        return cls(np.asarray(data["t"]), states, extras)


@dataclass(frozen=True, eq=False)
class DeterministicMode:
    """Evaluate leaves as h(x, mean) - threshold."""

    mean: np.ndarray
    predicates: Mapping[str, RiskPredicate]
    thresholds: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class StochasticMode:
    """Evaluate leaves as chance or risk margins under the Gaussian environment."""

    gaussian: GaussianVector
    predicates: Mapping[str, RiskPredicate]
    method: EvaluationMethod = AUTO


Mode = Union[DeterministicMode, StochasticMode]


@dataclass(frozen=True)
class RobustnessResult:
    value: float
    satisfied_strict: bool
    satisfied_weak: bool
    breakdown: Tuple[Tuple[str, str, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "satisfied_strict": self.satisfied_strict,
            "satisfied_weak": self.satisfied_weak,
            "breakdown": [{"path": p, "node": n, "value": v} for p, n, v in self.breakdown],
        }


def rho_predicate(pred: RiskPredicate, x, X: GaussianVector, method: EvaluationMethod = AUTO):
    """P - delta for chance predicates, gamma - R(-h) for risk predicates."""
    return pred.spec.margin(risk_value(pred.function, x, X, pred.spec, method))


def rho_stl_predicate(fn: PredicateFunction, x, mean, c: float, chi: float = 0.0):
    """h(x, mean) - c - chi"""
    return fn.mean_value(x, mean) - c - chi


def _snap(times: np.ndarray, target: float) -> int:
    idx = int(np.searchsorted(times, target))
    if idx <= 0:
        return 0
    if idx >= times.size:
        return times.size - 1
    return idx if times[idx] - target < target - times[idx - 1] else idx - 1


class _Evaluator:
    """Computes node signals over every trace sample (NaN where a window runs off the end)."""

    def __init__(self, traj: Trajectory, mode: Mode) -> None:
        self.traj = traj
        self.mode = mode
        self.signals: Dict[str, np.ndarray] = {}
        self.end = traj.times[-1] + max(SNAP_TOL, 0.5 * traj.step)

    def run(self, f: Formula, path: str = "root") -> np.ndarray:
        signal = self._node(f, path)
        self.signals[path] = signal
        return signal

    def _windows(self, interval) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        times = self.traj.times
        lo = np.array([_snap(times, t + interval.a) for t in times])
        hi = np.array([_snap(times, t + interval.b) for t in times])
        valid = times + interval.b <= self.end
        if np.any(hi[valid] < lo[valid]):
            raise HorizonError(f"empty sample window for interval [{interval.a}, {interval.b}]")
        return lo, hi, valid

    def _node(self, f: Formula, path: str) -> np.ndarray:
        K = len(self.traj)
        if isinstance(f, TrueF):
            return np.full(K, np.inf)
        if isinstance(f, Predicate):
            return self._leaf(f)
        if isinstance(f, Not):
            return -self.run(f.child, f"{path}.child")
        if isinstance(f, And):
            return np.minimum(self.run(f.left, f"{path}.left"), self.run(f.right, f"{path}.right"))
        if isinstance(f, Or):
            return np.maximum(self.run(f.left, f"{path}.left"), self.run(f.right, f"{path}.right"))
        if isinstance(f, (Eventually, Always)):
            child = self.run(f.child, f"{path}.child")
            lo, hi, valid = self._windows(f.interval)
            reduce = np.max if isinstance(f, Eventually) else np.min
            out = np.full(K, np.nan)
            for i in np.flatnonzero(valid):
                out[i] = reduce(child[lo[i]:hi[i] + 1])
            return out
        if isinstance(f, Until):
            left = self.run(f.left, f"{path}.left")
            right = self.run(f.right, f"{path}.right")
            lo, hi, valid = self._windows(f.interval)
            out = np.full(K, np.nan)
            for i in np.flatnonzero(valid):
                running = np.minimum.accumulate(left[i:hi[i] + 1])
                j = np.arange(lo[i], hi[i] + 1)
                out[i] = np.max(np.minimum(right[j], running[j - i]))
            return out
        raise TypeError(f"unknown formula node {type(f).__name__}")

    def _leaf(self, leaf: Predicate) -> np.ndarray:
        mode = self.mode
        pred = mode.predicates.get(leaf.id)
        if pred is None:
            raise UnknownPredicateError(f"no predicate function for {leaf.id!r}", predicate=leaf.id)
        states = self.traj.states
        if isinstance(mode, DeterministicMode):
            threshold = mode.thresholds.get(leaf.id, leaf.threshold)
            if threshold is None:
                raise UnknownPredicateError(
                    f"no deterministic threshold for {leaf.id!r}",
                    help="Determinize the formula or pass thresholds.",
                    predicate=leaf.id,
                )
            return np.asarray(rho_stl_predicate(pred.function, states, mode.mean, threshold), dtype=float)
        return np.asarray(rho_predicate(pred, states, mode.gaussian, mode.method), dtype=float).reshape(-1)


def rho(f: Formula, traj: Trajectory, t: float, mode: Mode) -> RobustnessResult:
    """Robustness of ``f`` at time ``t`` along ``traj``."""
    needed = t + horizon(f)
    evaluator = _Evaluator(traj, mode)
    if t < traj.times[0] - SNAP_TOL or needed > evaluator.end:
        raise HorizonError(
            f"trace covers [{traj.times[0]:g}, {traj.times[-1]:g}] but the formula needs [{t:g}, {needed:g}]",
            required=needed,
            available=float(traj.times[-1]),
        )
    evaluator.run(f)
    index = _snap(traj.times, t)
    value = float(evaluator.signals["root"][index])
    if np.isnan(value):
        raise HorizonError(f"robustness undefined at t={t:g}; trace too short")

    breakdown: List[Tuple[str, str, float]] = []
    for path, node in walk(f):
        signal = evaluator.signals.get(path)
        if signal is not None:
            breakdown.append((path, format_formula(node), float(signal[index])))
    logger.debug(f"rho({format_formula(f)}, t={t:g}) = {value:.6g}")
    return RobustnessResult(value, value > 0.0, value >= 0.0, tuple(breakdown))


def sat(f: Formula, traj: Trajectory, t: float, mode: Mode) -> Tuple[bool, bool]:
    """(strict, weak) satisfaction: rho > 0 and rho >= 0."""
    result = rho(f, traj, t, mode)
    return result.satisfied_strict, result.satisfied_weak


def resolution_sensitivity(f: Formula, traj: Trajectory, t: float, mode: Mode) -> Optional[dict]:
    """Robustness on the trace and on every other sample of it."""
    if len(traj) < 3:
        return None
    fine = rho(f, traj, t, mode).value
    coarse = rho(f, traj.subsample(2), t, mode).value
    difference = abs(fine - coarse)
    logger.debug(f"Resolution sensitivity: fine={fine:.6g} coarse={coarse:.6g}")
    return {"fine": fine, "coarse": coarse, "difference": difference, "step": traj.step}
