"""
Barrier functions

Time-varying, concave-in-state barrier functions encoding one subtask
G[t0,t*](invariance) & F[t*](reach) of a determinized specification.

Each component is h_k(p) + gamma_k(t), where gamma_k is a nonincreasing
relaxation that reaches its final level (0 unless a reach margin is
requested) at the deadline t*. The barrier is the scaled
log-sum-exp smooth minimum of the components:

    b(p, t) = -(gain / eta) * ln sum_k exp(-eta * (h_k(p) + gamma_k(t)))
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy import optimize
from scipy.special import logsumexp, softmax

from .config import settings
from .determinize import DomainBox, LinearTerm, PredicateTerm, Term, maximize_min
from .errors import BarrierError, GradientError

TIME_TOL = 1e-9


# ---------------------------------------------------------------------------
# Offsets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantOffset:
    level: float = 0.0

    def value(self, t: float) -> float:
        return self.level

    def rate(self, t: float) -> float:
        return 0.0


@dataclass(frozen=True)
class LinearOffset:
    """gamma(t) falls linearly from gamma0 at t0 to ``final`` at t_star and stays there."""

    gamma0: float
    t0: float
    t_star: float
    final: float = 0.0

    def value(self, t: float) -> float:
        if t >= self.t_star:
            return self.final
        return self.final + (self.gamma0 - self.final) * (1.0 - (t - self.t0) / (self.t_star - self.t0))

    def rate(self, t: float) -> float:
        if t >= self.t_star:
            return 0.0
        return -(self.gamma0 - self.final) / (self.t_star - self.t0)


@dataclass(frozen=True)
class ExponentialOffset:
    """Exponentially decaying relaxation, shifted so that gamma(t_star) = final."""

    gamma0: float
    t0: float
    t_star: float
    decay: float = 1.0
    final: float = 0.0

    def _tail(self) -> float:
        return math.exp(-self.decay * (self.t_star - self.t0))

    def value(self, t: float) -> float:
        if t >= self.t_star:
            return self.final
        tail = self._tail()
        return self.final + (self.gamma0 - self.final) * (math.exp(-self.decay * (t - self.t0)) - tail) / (1.0 - tail)

    def rate(self, t: float) -> float:
        if t >= self.t_star:
            return 0.0
        span = self.gamma0 - self.final
        return -span * self.decay * math.exp(-self.decay * (t - self.t0)) / (1.0 - self._tail())


Offset = Union[ConstantOffset, LinearOffset, ExponentialOffset]


# ---------------------------------------------------------------------------
# Barrier
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BarrierComponent:
    term: Term
    offset: Offset = field(default_factory=ConstantOffset)
    role: str = "invariance"  # invariance | reach | domain

    @property
    def name(self) -> str:
        return self.term.name

    def value(self, p, t: float):
        return self.term.value(p) + self.offset.value(t)


@dataclass(frozen=True, eq=False)
class BarrierFunction:
    components: Tuple[BarrierComponent, ...]
    eta: float
    t_start: float
    t_end: float
    gain: float = 1.0

    def __post_init__(self) -> None:
        if not self.components:
            raise BarrierError("barrier needs at least one component")
        if self.eta <= 0.0 or self.gain <= 0.0:
            raise BarrierError(f"eta and gain must be positive, got {self.eta} and {self.gain}")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def size(self) -> int:
        return len(self.components)

    @property
    def smoothing_gap(self) -> float:
        """Largest distance between b and gain * min_k component."""
        return self.gain * math.log(self.size) / self.eta

    def _check_time(self, t: float) -> None:
        if t < self.t_start - TIME_TOL or t > self.t_end + TIME_TOL:
            raise BarrierError(
                f"time {t:.6g} outside the barrier span [{self.t_start:.6g}, {self.t_end:.6g}]"
            )

    def component_values(self, p, t: float) -> np.ndarray:
        self._check_time(t)
        return np.stack([np.asarray(c.value(p, t), dtype=float) for c in self.components], axis=-1)

    def evaluate(self, p, t: float):
        values = self.component_values(p, t)
        b = -(self.gain / self.eta) * logsumexp(-self.eta * values, axis=-1)
        return float(b) if np.ndim(b) == 0 else b

    def weights(self, p, t: float) -> np.ndarray:
        return softmax(-self.eta * self.component_values(p, t), axis=-1)

    def grad_p(self, p, t: float) -> np.ndarray:
        """Softmax-weighted component gradients; raises GradientError at a norm center."""
        p = np.asarray(p, dtype=float)
        w = self.weights(p, t)
        grads = np.stack([c.term.gradient(p) for c in self.components], axis=-2)
        return self.gain * np.einsum("...k,...kd->...d", w, grads)

    def ddt(self, p, t: float):
        w = self.weights(p, t)
        rates = np.array([c.offset.rate(t) for c in self.components])
        out = self.gain * (w @ rates)
        return float(out) if np.ndim(out) == 0 else out

    def minimum_component(self, p, t: float):
        return self.component_values(p, t).min(axis=-1)

    def finite_difference_check(self, p, t: float, step: float = 1e-5) -> Tuple[np.ndarray, float]:
        """Central-difference estimates of (grad_p, ddt)."""
        p = np.asarray(p, dtype=float)
        grad = np.zeros_like(p)
        for i in range(p.size):
            e = np.zeros_like(p)
            e[i] = step
            grad[i] = (self.evaluate(p + e, t) - self.evaluate(p - e, t)) / (2.0 * step)
        lo = max(self.t_start, t - step)
        hi = min(self.t_end, t + step)
        ddt = (self.evaluate(p, hi) - self.evaluate(p, lo)) / (hi - lo)
        return grad, ddt


def gradient_with_perturbation(b: BarrierFunction, p, t: float) -> np.ndarray:
    """grad_p, nudging the point off a norm center when the gradient is undefined there."""
    try:
        return b.grad_p(p, t)
    except GradientError:
        return b.grad_p(np.asarray(p, dtype=float) + settings.gradient_perturbation, t)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _offset(
    shape: str, gamma0: float, t0: float, t_star: float, decay: Optional[float], final: float = 0.0
) -> Offset:
    if gamma0 <= 0.0 and final == 0.0:
        return ConstantOffset(0.0)
    if t_star <= t0:
        return ConstantOffset(gamma0)
    gamma0 = max(gamma0, final)
    if shape == "exponential":
        return ExponentialOffset(gamma0, t0, t_star, decay or 1.0, final)
    return LinearOffset(gamma0, t0, t_star, final)


def build_barrier(
    invariance: Sequence[Term],
    reach: Sequence[Term],
    p0,
    t0: float,
    t_star: float,
    eta: float = settings.eta,
    box: Optional[DomainBox] = None,
    activation_points: Optional[np.ndarray] = None,
    gain: float = 1.0,
    shape: str = "linear",
    decay: Optional[float] = None,
    reach_margin: float = 0.0,
) -> BarrierFunction:
    """Barrier for G[t0,t_star](invariance) & F[t_star](reach) activated at p0.

    Invariance terms and box faces carry no offset. Reach terms are relaxed so
    that every activation point (p0 and any supplied points) starts inside,
    and end at ``-reach_margin`` so the deadline leaves the reach set with
    that much room.
    """
    p0 = np.asarray(p0, dtype=float)
    if t_star < t0 - TIME_TOL:
        raise BarrierError(f"deadline {t_star:.6g} precedes activation time {t0:.6g}")
    if reach_margin < 0.0:
        raise BarrierError(f"reach margin must be nonnegative, got {reach_margin:.4g}")

    for term in invariance:
        value = float(term.value(p0))
        if value <= 0.0:
            raise BarrierError(
                f"activation point violates invariance predicate {term.name} (value {value:.4g})",
                point=p0.tolist(),
            )

    search_box = box or DomainBox(p0 - 10.0, p0 + 10.0)
    members = list(invariance) + list(reach)
    if members:
        witness, best = maximize_min(members, search_box)
        needed = reach_margin if reach else 0.0
        if best <= needed:
            raise BarrierError(
                f"invariance and reach predicates have no common strictly feasible point (best {best:.4g})",
            )
        logger.debug(f"Subtask witness {witness} with value {best:.4g}")

    points = p0[None, :]
    if activation_points is not None and len(activation_points):
        points = np.vstack([points, np.asarray(activation_points, dtype=float)])

    gaps = [max(0.0, -float(np.min(term.value(points)))) for term in reach]
    components: List[BarrierComponent] = [BarrierComponent(term) for term in invariance]
    if box is not None:
        components += [BarrierComponent(face, role="domain") for face in box.faces()]

    def assemble(extra: float) -> BarrierFunction:
        reach_components = [
            BarrierComponent(
                term,
                _offset(shape, settings.activation_inflation * gap + extra, t0, t_star, decay, -reach_margin),
                "reach",
            )
            for term, gap in zip(reach, gaps)
        ]
        return BarrierFunction(tuple(components + reach_components), eta, t0, t_star, gain)

    extra = 0.0
    barrier = assemble(extra)
    for _ in range(50):
        b0 = barrier.evaluate(p0, t0)
        if b0 >= 0.0:
            logger.debug(f"Barrier built with {barrier.size} components, b(p0, t0) = {b0:.4g}")
            return barrier
        if not reach:
            break
        values = barrier.component_values(p0, t0)
        roles = [c.role for c in barrier.components]
        reach_min = min(v for v, role in zip(values, roles) if role == "reach")
        others = [v for v, role in zip(values, roles) if role != "reach"]
        # relaxing reach no longer moves b once the fixed components dominate
        if others and reach_min >= min(others) + barrier.smoothing_gap / gain:
            break
        extra += max(-b0 / gain, 1e-3)
        barrier = assemble(extra)

    b0 = barrier.evaluate(p0, t0)
    worst = float(np.min(barrier.component_values(p0, t0)))
    if worst >= 0.0 and b0 >= -barrier.smoothing_gap:
        logger.warning(
            f"Activation point sits within the smoothing gap: b(p0, t0) = {b0:.4g}, smallest component {worst:.4g}"
        )
        return barrier
    raise BarrierError(
        f"no reach relaxation makes b(p0, t0) nonnegative (b = {b0:.4g})",
        point=p0.tolist(),
    )


# ---------------------------------------------------------------------------
# Parameters and switching
# ---------------------------------------------------------------------------

def alpha_bound(b_star: float, ddt_star: float, chi: float) -> float:
    """Smallest alpha >= 1 with alpha * b* + db/dt >= chi at the maximizer."""
    return max(1.0, (chi - ddt_star) / b_star)


def maximize_barrier(b: BarrierFunction, t: float, box: DomainBox, start=None) -> Tuple[np.ndarray, float]:
    def objective(p):
        return -b.evaluate(p, t), -gradient_with_perturbation(b, p, t)

    x0 = box.center if start is None else box.clip(start)
    result = optimize.minimize(objective, x0, jac=True, method="L-BFGS-B", bounds=box.bounds())
    p_star = box.clip(result.x)
    return p_star, float(b.evaluate(p_star, t))


def choose_alpha(b: BarrierFunction, box: DomainBox, safety_chi: float = settings.safety_chi) -> float:
    """alpha from the maximizer condition on a time grid over the barrier span."""
    times = np.linspace(b.t_start, b.t_end, settings.alpha_grid_points) if b.t_end > b.t_start else [b.t_start]
    alpha = 1.0
    start = None
    for t in times:
        p_star, b_star = maximize_barrier(b, float(t), box, start)
        if b_star <= 0.0:
            raise BarrierError(f"barrier maximum is {b_star:.4g} <= 0 at t = {t:.4g}", time=float(t))
        ddt_star = b.ddt(p_star, float(t))
        alpha = max(alpha, alpha_bound(b_star, ddt_star, safety_chi))
        start = p_star
    logger.debug(f"Chose alpha = {alpha:.4g} over {len(times)} grid times")
    return float(alpha)


def superlevel_points(b: BarrierFunction, t: float, box: DomainBox, n: int = settings.containment_grid) -> np.ndarray:
    """Grid points of the box where b(., t) >= 0."""
    grid = box.grid(n)
    return grid[np.asarray(b.evaluate(grid, t)) >= 0.0]


@dataclass(frozen=True)
class ContainmentReport:
    ok: bool
    checked: int
    counterexample: Optional[Tuple[float, ...]] = None
    worst_value: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checked": self.checked,
            "counterexample": list(self.counterexample) if self.counterexample else None,
            "worst_value": self.worst_value,
        }


def check_switch_containment(
    b_prev: BarrierFunction,
    b_next: BarrierFunction,
    s_j: float,
    box: DomainBox,
    sample_count: int = settings.containment_grid,
) -> ContainmentReport:
    """Sampled check that the zero-superlevel set of b_prev at s_j lies in that of b_next.

    b_next is allowed to dip by its smoothing gap on the sampled points.
    """
    points = superlevel_points(b_prev, s_j, box, sample_count)
    if len(points) == 0:
        return ContainmentReport(True, 0)
    values = np.asarray(b_next.evaluate(points, s_j))
    worst = int(np.argmin(values))
    ok = bool(values[worst] >= -b_next.smoothing_gap)
    if not ok:
        logger.warning(f"Switch containment fails at {points[worst]} (b_next = {values[worst]:.4g})")
    return ContainmentReport(
        ok,
        int(len(points)),
        None if ok else tuple(float(v) for v in points[worst]),
        float(values[worst]),
    )


def subtask_terms(predicates, mean, levels, ids) -> List[PredicateTerm]:
    return [PredicateTerm(predicates[pid], mean, levels[pid]) for pid in ids]


__all__ = [
    "BarrierComponent",
    "BarrierFunction",
    "ConstantOffset",
    "ContainmentReport",
    "ExponentialOffset",
    "LinearOffset",
    "LinearTerm",
    "alpha_bound",
    "build_barrier",
    "check_switch_containment",
    "choose_alpha",
    "gradient_with_perturbation",
    "maximize_barrier",
    "subtask_terms",
    "superlevel_points",
]
