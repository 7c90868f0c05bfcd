"""
Closed-loop simulation

Runs the disturbed unicycle under the barrier controller, one subtask
G[t0,b_i](invariance) & F[b_i](reach) after another, records the trace and
evaluates the result with the monitor.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from .barrier import (
    BarrierFunction,
    ContainmentReport,
    build_barrier,
    check_switch_containment,
    choose_alpha,
    gradient_with_perturbation,
    subtask_terms,
    superlevel_points,
)
from .config import settings
from .control import (
    ControlOutput,
    UnicycleState,
    constraint_terms,
    diffeo,
    g_p_matrix,
    min_norm_control,
    select_l,
    slack_control,
)
from .determinize import DeterminizationResult, DomainBox, RBound, robustness_bound_r, synthesize
from .errors import DivergenceError, HorizonError, RistlError, ScenarioError, SwitchContainmentError
from .logic import Formula
from .monitor import DeterministicMode, StochasticMode, Trajectory, resolution_sensitivity, rho
from .stochastics import GaussianVector, RiskPredicate

TRACE_COLUMNS = ("t", "x1", "x2", "theta", "p1", "p2", "u1", "u2", "b", "eps")
COL = {name: i for i, name in enumerate(TRACE_COLUMNS)}


# ---------------------------------------------------------------------------
# Disturbances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroDisturbance:
    def __call__(self, x: np.ndarray, t: float, index: int) -> np.ndarray:
        return np.zeros(2)


@dataclass(frozen=True)
class ConstantDisturbance:
    vector: Tuple[float, float]

    def __call__(self, x: np.ndarray, t: float, index: int) -> np.ndarray:
        return np.asarray(self.vector, dtype=float)


@dataclass(frozen=True)
class SaturatedSpring:
    """c_x = -gain * sat(x) with sat clipping each coordinate to [-1, 1]."""

    gain: float = 0.5

    def __call__(self, x: np.ndarray, t: float, index: int) -> np.ndarray:
        return -self.gain * np.clip(x, -1.0, 1.0)


@dataclass(frozen=True)
class BoundedNoise:
    """Uniform direction and magnitude in [0, bound], held over each integration step."""

    bound: float
    seed: int = 0

    def __call__(self, x: np.ndarray, t: float, index: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, index])
        angle = rng.uniform(-math.pi, math.pi)
        return rng.uniform(0.0, self.bound) * np.array([math.cos(angle), math.sin(angle)])


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subtask:
    invariant: Tuple[str, ...]
    reach: Tuple[str, ...]
    deadline: float
    name: str = ""

    @property
    def members(self) -> Tuple[str, ...]:
        return tuple(self.invariant) + tuple(pid for pid in self.reach if pid not in self.invariant)


@dataclass(frozen=True)
class Dynamics:
    drift_x: Tuple[float, float] = (0.0, 0.0)
    drift_theta: float = 0.0
    disturbance: object = field(default_factory=ZeroDisturbance)
    bound: float = 0.0
    bound_reading: str = "norm"  # norm | component

    @property
    def effective_bound(self) -> float:
        """Norm bound on c_x used by the controller."""
        return self.bound * (math.sqrt(2.0) if self.bound_reading == "component" else 1.0)

    def disturbance_at(self, x: np.ndarray, t: float, index: int) -> np.ndarray:
        c = np.asarray(self.disturbance(x, t, index), dtype=float)
        if self.bound_reading == "component":
            return np.clip(c, -self.bound, self.bound)
        norm = float(np.linalg.norm(c))
        if norm > self.bound:
            c = c * (self.bound / norm) if norm > 0.0 else c
        return c

    def transformed_drift(self, theta: float, l: float) -> np.ndarray:
        """f_p = f_x + l * f_theta * (-sin theta, cos theta)"""
        return np.asarray(self.drift_x, dtype=float) + l * self.drift_theta * np.array(
            [-math.sin(theta), math.cos(theta)]
        )


@dataclass(frozen=True)
class ControllerConfig:
    law: str = "slack"  # slack | min_norm
    l: Optional[float] = None
    eta: float = settings.eta
    alpha: Optional[float] = None
    barrier_gain: float = 1.0
    safety_chi: float = settings.safety_chi
    offset_shape: str = "linear"
    offset_decay: Optional[float] = None
    reach_margin: float = 0.0


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = settings.dt
    t_end: Optional[float] = None

    @property
    def tol_num(self) -> float:
        return 10.0 * self.dt


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    gaussian: GaussianVector
    predicates: Mapping[str, RiskPredicate]
    formula: Formula
    formula_text: str
    subtasks: Tuple[Subtask, ...]
    dynamics: Dynamics
    controller: ControllerConfig
    integrator: IntegratorConfig
    box: DomainBox
    initial: UnicycleState
    seed: int = 0
    chi_overrides: Mapping[str, float] = field(default_factory=dict)
    references: Mapping[str, float] = field(default_factory=dict)
    alternate_gaussian: Optional[GaussianVector] = None
    alternate_label: str = "std_reading"

    @property
    def extra_conjunctions(self) -> List[Tuple[str, List[str]]]:
        return [(subtask.name or f"subtask_{i + 1}", list(subtask.members)) for i, subtask in enumerate(self.subtasks)]


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

def step(z: UnicycleState, u, t: float, dt: float, dynamics: Dynamics, index: int = 0) -> UnicycleState:
    """One RK4 step with u held constant over [t, t + dt]."""
    if dt <= 0.0:
        raise RistlError(f"integration step must be positive, got {dt}")
    u = np.asarray(u, dtype=float)

    def rhs(state: np.ndarray, time: float) -> np.ndarray:
        x, theta = state[:2], state[2]
        c_x = dynamics.disturbance_at(x, time, index)
        velocity = np.asarray(dynamics.drift_x, dtype=float) + u[0] * np.array([math.cos(theta), math.sin(theta)]) + c_x
        return np.array([velocity[0], velocity[1], dynamics.drift_theta + u[1]])

    s = z.as_array()
    k1 = rhs(s, t)
    k2 = rhs(s + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = rhs(s + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = rhs(s + dt * k3, t + dt)
    out = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise DivergenceError(f"state became non-finite at t = {t + dt:.4g}", time=t + dt)
    return UnicycleState.from_array(out)


# ---------------------------------------------------------------------------
# Subtasks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SubtaskPlan:
    index: int
    subtask: Subtask
    barrier: BarrierFunction
    alpha: float
    t0: float
    reach_terms: tuple

    @property
    def deadline(self) -> float:
        return self.subtask.deadline


def prepare_subtask(
    scenario: Scenario,
    determinization: DeterminizationResult,
    index: int,
    p0,
    t0: float,
    previous: Optional[SubtaskPlan] = None,
) -> Tuple[SubtaskPlan, Optional[ContainmentReport]]:
    """Barrier and alpha for subtask ``index`` activated at p0, plus the switch check."""
    subtask = scenario.subtasks[index]
    levels = determinization.levels(modified=True)
    mean = scenario.gaussian.mean
    invariance = subtask_terms(scenario.predicates, mean, levels, subtask.invariant)
    reach = subtask_terms(scenario.predicates, mean, levels, [pid for pid in subtask.reach if pid not in subtask.invariant])

    activation = None
    if previous is not None:
        activation = superlevel_points(previous.barrier, t0, scenario.box)

    controller = scenario.controller
    barrier = build_barrier(
        invariance,
        reach,
        p0,
        t0,
        subtask.deadline,
        eta=controller.eta,
        box=scenario.box,
        activation_points=activation,
        gain=controller.barrier_gain,
        shape=controller.offset_shape,
        decay=controller.offset_decay,
        reach_margin=controller.reach_margin,
    )
    alpha = controller.alpha if controller.alpha is not None else choose_alpha(barrier, scenario.box, controller.safety_chi)

    containment = None
    if previous is not None:
        containment = check_switch_containment(previous.barrier, barrier, t0, scenario.box)
        if not containment.ok:
            raise SwitchContainmentError(
                f"feasible set of subtask {index} is not contained in subtask {index + 1} at t = {t0:.4g}",
                witness=list(containment.counterexample),
                subtask=index + 1,
            )
    return SubtaskPlan(index, subtask, barrier, float(alpha), t0, tuple(reach)), containment


def compute_control(plan: SubtaskPlan, z: UnicycleState, t: float, scenario: Scenario, l: float) -> Tuple[float, ControlOutput]:
    """(b, control output) at state z and time t."""
    barrier = plan.barrier
    p = diffeo(z, l)
    b = barrier.evaluate(p, t)
    grad = gradient_with_perturbation(barrier, p, t)
    ddt = barrier.ddt(p, t)
    f_p = scenario.dynamics.transformed_drift(z.theta, l)
    a, d = constraint_terms(grad, g_p_matrix(z.theta, l), f_p, ddt)
    law = slack_control if scenario.controller.law == "slack" else min_norm_control
    out = law(a, d, b, float(np.linalg.norm(grad)), plan.alpha, scenario.dynamics.effective_bound)
    logger.trace(f"t={t:.3f} b={b:.4g} branch={out.branch} u={out.u}")
    return b, out


def step_count(t0: float, deadline: float, dt: float) -> int:
    return int(math.floor((deadline - t0) / dt + 1e-9))


def run_subtask(
    z0: UnicycleState,
    plan: SubtaskPlan,
    scenario: Scenario,
    l: float,
) -> Tuple[np.ndarray, UnicycleState, dict]:
    """Simulate one subtask; returns trace rows, final state and status."""
    dt = scenario.integrator.dt
    tol = scenario.integrator.tol_num
    b_tol = invariance_tolerance(scenario)
    n = step_count(plan.t0, plan.deadline, dt)
    if n == 0:
        logger.warning(f"Subtask {plan.index + 1}: deadline {plan.deadline:g} is shorter than one step of {dt:g}")
    escape = settings.divergence_factor * scenario.box.diagonal
    slack = scenario.controller.law == "slack"

    rows = []
    z = z0
    for k in range(n + 1):
        t = plan.t0 + k * dt if k < n else plan.t0 + n * dt
        b, out = compute_control(plan, z, t, scenario, l)
        p = diffeo(z, l)
        rows.append([t, z.x[0], z.x[1], z.theta, p[0], p[1], out.u[0], out.u[1], b, out.epsilon])
        if k == n:
            break
        z = step(z, out.u, t, dt, scenario.dynamics, index=int(round(t / dt)))
        if np.linalg.norm(z.x - scenario.box.center) > escape:
            raise DivergenceError(
                f"state left the escape radius {escape:.4g} at t = {t + dt:.4g}",
                time=t + dt,
                subtask=plan.index + 1,
            )
    table = np.asarray(rows, dtype=float)

    p_end = table[-1, [COL["p1"], COL["p2"]]]
    reach_value = min((float(term.value(p_end)) for term in plan.reach_terms), default=None)
    reached = reach_value is None or reach_value >= -tol
    recorded = table if plan.index == 0 or n == 0 else table[1:]
    eps_r = float(recorded[:, COL["eps"]].min()) if slack else None
    b_values = table[:, COL["b"]]
    floor = invariance_floor(float(b_values[0]), eps_r, plan.alpha, b_tol)
    below = np.flatnonzero(b_values < floor)
    status = {
        "index": plan.index + 1,
        "name": plan.subtask.name,
        "t0": plan.t0,
        "deadline": plan.deadline,
        "steps": n,
        "alpha": plan.alpha,
        "reach_value": reach_value,
        "reached": bool(reached),
        "b_min": float(b_values.min()),
        "invariance_floor": floor,
        "invariance_ok": below.size == 0,
        "first_violation": int(below[0]) if below.size else None,
        "eps_r": eps_r,
    }
    status["status"] = "succeeded" if reached and status["invariance_ok"] else "failed"
    logger.info(
        f"Subtask {plan.index + 1} {status['status']} at t = {plan.deadline:g} "
        f"(reach {reach_value if reach_value is None else round(reach_value, 4)}, b_min {status['b_min']:.4g})"
    )
    return table, z, status


def invariance_floor(b_start: float, eps_r: Optional[float], alpha: float, tol: float) -> float:
    """Lowest admissible b: min(b(p0), eps_r/alpha) for the slack law, 0 otherwise, minus tol."""
    if eps_r is None:
        return -tol
    return min(b_start, eps_r / alpha) - tol


def invariance_tolerance(scenario: Scenario) -> float:
    """tol_num on the scale of b, which carries the barrier gain."""
    return scenario.integrator.tol_num * max(1.0, scenario.controller.barrier_gain)


# ---------------------------------------------------------------------------
# Scenario runs
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class SimResult:
    trajectory: np.ndarray
    subtasks: List[dict]
    eps_r: Optional[float]
    alphas: List[float]
    l: float
    tol_num: float
    robustness: Dict[str, Optional[float]] = field(default_factory=dict)
    r_bound: Optional[RBound] = None
    resolution: Optional[dict] = None
    diffeo_margin_ok: bool = True
    determinization: Optional[DeterminizationResult] = None

    @property
    def success(self) -> bool:
        return len(self.subtasks) > 0 and all(s["status"] == "succeeded" for s in self.subtasks)

    @property
    def invariance_ok(self) -> bool:
        return all(s.get("invariance_ok", False) for s in self.subtasks if s["status"] != "skipped")

    @property
    def failing_subtask(self) -> Optional[int]:
        for s in self.subtasks:
            if s["status"] != "succeeded":
                return s["index"]
        return None

    def columns(self) -> Dict[str, np.ndarray]:
        return {name: self.trajectory[:, i] for i, name in enumerate(TRACE_COLUMNS)}

    def to_summary(self) -> dict:
        return {
            "success": self.success,
            "invariance_ok": self.invariance_ok,
            "failing_subtask": self.failing_subtask,
            "eps_r": self.eps_r,
            "alpha": max(self.alphas) if self.alphas else None,
            "alphas": self.alphas,
            "l": self.l,
            "tol_num": self.tol_num,
            "samples": int(self.trajectory.shape[0]),
            "subtasks": self.subtasks,
            "robustness": self.robustness,
            "r_bound": self.r_bound.to_dict() if self.r_bound else None,
            "resolution_sensitivity": self.resolution,
            "diffeo_margin_ok": self.diffeo_margin_ok,
        }


def determinize_scenario(scenario: Scenario) -> DeterminizationResult:
    return synthesize(
        scenario.formula,
        scenario.predicates,
        scenario.box,
        scenario.gaussian,
        extra_conjunctions=scenario.extra_conjunctions,
        chi_overrides=scenario.chi_overrides,
    )


def robustness_values(
    scenario: Scenario,
    determinization: DeterminizationResult,
    times: np.ndarray,
    x: np.ndarray,
    p: np.ndarray,
) -> Dict[str, Optional[float]]:
    """rho of phi bar on the p-trace, phi on the x-trace and the RiSTL formula on the x-trace."""
    mean = scenario.gaussian.mean
    values: Dict[str, Optional[float]] = {}
    jobs = {
        "phi_bar": (determinization.phi_bar, Trajectory(times, p), DeterministicMode(mean, scenario.predicates)),
        "phi": (determinization.phi, Trajectory(times, x), DeterministicMode(mean, scenario.predicates)),
        "stochastic": (scenario.formula, Trajectory(times, x), StochasticMode(scenario.gaussian, scenario.predicates)),
    }
    for key, (formula, trace, mode) in jobs.items():
        try:
            values[key] = rho(formula, trace, 0.0, mode).value
        except HorizonError as e:
            logger.warning(f"Robustness {key} not available: {e.message}")
            values[key] = None
    return values


def diffeo_margin_holds(scenario: Scenario, determinization: DeterminizationResult, x: np.ndarray, p: np.ndarray) -> bool:
    """h(p) - c - chi >= 0 implies h(x) - c >= 0 at every sample and predicate."""
    mean = scenario.gaussian.mean
    for pid, c in determinization.thresholds.items():
        fn = scenario.predicates[pid].function
        modified = fn.mean_value(p, mean) - c - determinization.chis[pid] >= 0.0
        plain = fn.mean_value(x, mean) - c >= -1e-9
        if np.any(modified & ~plain):
            logger.warning(f"Diffeomorphism margin violated for {pid}")
            return False
    return True


def run_scenario(scenario: Scenario, determinization: Optional[DeterminizationResult] = None) -> SimResult:
    """Run every subtask in sequence and evaluate the resulting trace."""
    det = determinization or determinize_scenario(scenario)
    l = select_l(det.chis, det.lipschitz, scenario.controller.l)
    logger.info(f"Simulating {scenario.name!r}: {len(scenario.subtasks)} subtasks, l = {l:.4g}, law {scenario.controller.law}")

    z = scenario.initial
    t0 = 0.0
    plan: Optional[SubtaskPlan] = None
    segments: List[np.ndarray] = []
    statuses: List[dict] = []
    t_end = scenario.integrator.t_end
    for index in range(len(scenario.subtasks)):
        if t_end is not None and scenario.subtasks[index].deadline > t_end + 1e-9:
            logger.warning(f"Subtask {index + 1} ends after t_end = {t_end:g}; stopping the run at t = {t0:g}")
            for rest in range(index, len(scenario.subtasks)):
                statuses.append(
                    {"index": rest + 1, "name": scenario.subtasks[rest].name, "status": "skipped", "reason": "after t_end"}
                )
            break
        plan, containment = prepare_subtask(scenario, det, index, diffeo(z, l), t0, plan)
        table, z, status = run_subtask(z, plan, scenario, l)
        if containment is not None:
            status["containment"] = containment.to_dict()
        statuses.append(status)
        segments.append(table if index == 0 else table[1:])
        if status["status"] != "succeeded":
            logger.error(f"Subtask {index + 1} failed; skipping the remaining subtasks")
            for rest in range(index + 1, len(scenario.subtasks)):
                statuses.append({"index": rest + 1, "name": scenario.subtasks[rest].name, "status": "skipped"})
            break
        t0 = scenario.subtasks[index].deadline

    if not segments:
        raise ScenarioError(f"no subtask finishes by t_end = {t_end:g}", location="integrator.t_end")
    trajectory = np.vstack(segments)
    times = trajectory[:, COL["t"]]
    x = trajectory[:, [COL["x1"], COL["x2"]]]
    p = trajectory[:, [COL["p1"], COL["p2"]]]
    alphas = [s["alpha"] for s in statuses if "alpha" in s]
    eps_values = [s["eps_r"] for s in statuses if s.get("eps_r") is not None]
    eps_r = min(eps_values) if eps_values else None

    result = SimResult(
        trajectory=trajectory,
        subtasks=statuses,
        eps_r=eps_r,
        alphas=alphas,
        l=l,
        tol_num=scenario.integrator.tol_num,
        determinization=det,
    )
    result.robustness = robustness_values(scenario, det, times, x, p)
    result.diffeo_margin_ok = diffeo_margin_holds(scenario, det, x, p)
    if eps_r is not None and eps_r >= 0.0 and alphas:
        result.r_bound = robustness_bound_r(
            scenario.predicates,
            det.thresholds,
            eps_r,
            max(alphas) * scenario.controller.barrier_gain,
            scenario.box,
            scenario.gaussian,
        )
    try:
        result.resolution = resolution_sensitivity(det.phi_bar, Trajectory(times, p), 0.0, DeterministicMode(scenario.gaussian.mean, scenario.predicates))
    except HorizonError:
        result.resolution = None
    if result.resolution and result.resolution["difference"] > 10.0 * result.resolution["step"]:
        logger.warning(f"Robustness depends on the sample step: {result.resolution}")
    logger.info(f"Scenario {scenario.name!r} finished: success={result.success}, eps_r={eps_r}")
    return result


# ---------------------------------------------------------------------------
# Disturbance sweeps
# ---------------------------------------------------------------------------

def _sweep_run(args) -> dict:
    scenario, determinization, seed = args
    noisy = replace(
        scenario,
        dynamics=replace(scenario.dynamics, disturbance=BoundedNoise(scenario.dynamics.bound, seed)),
    )
    try:
        result = run_scenario(noisy, determinization)
    except RistlError as e:
        return {"seed": seed, "success": False, "invariance_ok": False, "eps_r": None, "error": e.to_dict()}
    return {"seed": seed, "success": result.success, "invariance_ok": result.invariance_ok, "eps_r": result.eps_r}


def disturbance_sweep(scenario: Scenario, seeds: Sequence[int], workers: Optional[int] = None) -> dict:
    """Rerun the scenario under seeded bounded-noise disturbances."""
    det = determinize_scenario(scenario)
    jobs = [(scenario, det, int(seed)) for seed in seeds]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_sweep_run, jobs))
    else:
        runs = [_sweep_run(job) for job in jobs]
    eps = [run["eps_r"] for run in runs if run["eps_r"] is not None]
    summary = {
        "runs": runs,
        "all_succeeded": all(run["success"] for run in runs),
        "all_invariant": all(run["invariance_ok"] for run in runs),
        "min_eps_r": min(eps) if eps else None,
    }
    logger.info(f"Disturbance sweep over {len(runs)} seeds: all succeeded = {summary['all_succeeded']}")
    return summary


# ---------------------------------------------------------------------------
# Trace verification
# ---------------------------------------------------------------------------

@dataclass
class VerificationReport:
    checks: Dict[str, dict] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(check["ok"] for check in self.checks.values())

    def add(self, name: str, ok: bool, **detail) -> None:
        self.checks[name] = {"ok": bool(ok), **detail}

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": self.checks}


def _subtask_rows(times: np.ndarray, subtasks: Sequence[Subtask]) -> List[np.ndarray]:
    groups = []
    start = -np.inf
    for i, subtask in enumerate(subtasks):
        lower = times > start + 1e-9 if i > 0 else times >= times[0]
        groups.append(np.flatnonzero(lower & (times <= subtask.deadline + 1e-9)))
        start = subtask.deadline
    return groups


def verify_trace(scenario: Scenario, table: np.ndarray, tol: float = 1e-6) -> VerificationReport:
    """Recompute barrier values, invariance, eps_r, the r bound and the soundness chain on a trace."""
    report = VerificationReport()
    det = determinize_scenario(scenario)
    l = select_l(det.chis, det.lipschitz, scenario.controller.l)
    times = table[:, COL["t"]]
    x = table[:, [COL["x1"], COL["x2"]]]
    theta = table[:, COL["theta"]]
    p = table[:, [COL["p1"], COL["p2"]]]

    expected_p = x + l * np.column_stack([np.cos(theta), np.sin(theta)])
    p_error = float(np.max(np.abs(expected_p - p)))
    report.add("diffeo", p_error <= tol, max_error=p_error)

    groups = _subtask_rows(times, scenario.subtasks)
    plan: Optional[SubtaskPlan] = None
    t0 = 0.0
    b_error = 0.0
    alphas: List[float] = []
    eps_values: List[float] = []
    invariance = {"ok": True, "first_violation": None}
    slack = scenario.controller.law == "slack"
    for index, rows in enumerate(groups):
        if rows.size == 0:
            break
        start_row = rows[0] - 1 if index > 0 else rows[0]
        plan, _ = prepare_subtask(scenario, det, index, p[start_row], t0, plan)
        span = np.concatenate([[start_row], rows]) if index > 0 else rows
        recomputed = np.array([plan.barrier.evaluate(p[i], times[i]) for i in span])
        stored_rows = span[1:] if index > 0 else span
        stored = recomputed[1:] if index > 0 else recomputed
        b_error = max(b_error, float(np.max(np.abs(stored - table[stored_rows, COL["b"]]))))
        alphas.append(plan.alpha)
        eps_r = float(table[rows, COL["eps"]].min()) if slack else None
        if eps_r is not None:
            eps_values.append(eps_r)
        floor = invariance_floor(float(recomputed[0]), eps_r, plan.alpha, invariance_tolerance(scenario))
        below = np.flatnonzero(recomputed < floor)
        if below.size and invariance["ok"]:
            invariance = {"ok": False, "first_violation": int(span[below[0]]), "subtask": index + 1}
        t0 = scenario.subtasks[index].deadline

    report.add("barrier_consistency", b_error <= tol * max(1.0, scenario.controller.barrier_gain), max_error=b_error)
    report.add("invariance", invariance["ok"], **{k: v for k, v in invariance.items() if k != "ok"})

    eps_r = min(eps_values) if eps_values else None
    report.add("eps_r", eps_r is None or eps_r >= -tol, value=eps_r)
    if eps_r is not None and eps_r >= 0.0 and alphas:
        bound = robustness_bound_r(
            scenario.predicates, det.thresholds, eps_r, max(alphas) * scenario.controller.barrier_gain, scenario.box, scenario.gaussian
        )
        report.add("r_bound", True, **bound.to_dict())

    values = robustness_values(scenario, det, times, x, p)
    chain_ok = True
    if values["phi_bar"] is not None and values["phi_bar"] >= 0.0:
        chain_ok = values["phi"] is not None and values["phi"] >= 0.0
        if chain_ok:
            chain_ok = values["stochastic"] is not None and values["stochastic"] >= 0.0
    report.add("soundness_chain", chain_ok, **values)
    logger.info(f"Trace verification {'passed' if report.ok else 'failed'}")
    return report
