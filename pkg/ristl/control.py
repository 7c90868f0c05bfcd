"""
Unicycle control

Near-identity diffeomorphism p = x + l * (cos theta, sin theta) and the two
single-constraint barrier QPs, solved by KKT case analysis:

    min_norm:  min u.u           s.t. a.u >= q
    slack:     min u.u - eps     s.t. a.u - eps >= q, eps >= 0

with a = grad_p b . g_p(z) and q = -alpha * b + ||grad_p b|| * C - d, where
d = grad_p b . f_p + db/dt.
"""

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .config import settings
from .errors import ControllerInfeasibleError, RistlError

LIPSCHITZ_TOL = 1e-12


def wrap_angle(theta: float) -> float:
    """Map an angle to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class UnicycleState:
    x: np.ndarray
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).reshape(2))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x[0], self.x[1], self.theta])

    @classmethod
    def from_array(cls, z) -> "UnicycleState":
        return cls(np.asarray(z[:2], dtype=float), float(z[2]))


def diffeo(z: UnicycleState, l: float) -> np.ndarray:
    if l <= 0.0:
        raise RistlError(f"diffeomorphism offset l must be positive, got {l}")
    return z.x + l * np.array([math.cos(z.theta), math.sin(z.theta)])


def g_p_matrix(theta: float, l: float) -> np.ndarray:
    """Input matrix of the transformed dynamics; its determinant is l."""
    if l <= 0.0:
        raise RistlError(f"diffeomorphism offset l must be positive, got {l}")
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -l * s], [s, l * c]])


@dataclass(frozen=True)
class DiffeoConfig:
    l: float
    chi: Mapping[str, float]
    lipschitz: Mapping[str, float]

    def __post_init__(self) -> None:
        if self.l <= 0.0:
            raise RistlError(f"diffeomorphism offset l must be positive, got {self.l}")
        bound = max_offset(self.chi, self.lipschitz)
        if self.l > bound * (1.0 + 1e-9):
            raise RistlError(
                f"offset l = {self.l:.4g} exceeds min chi / L = {bound:.4g}",
                help="Lower controller.l or raise the margins chi.",
            )


def max_offset(chi: Mapping[str, float], lipschitz: Mapping[str, float]) -> float:
    """min_m chi_m / L_m (predicates with zero Lipschitz constant impose no bound)."""
    bounds = [chi[pid] / lipschitz[pid] for pid in chi if lipschitz.get(pid, 0.0) > LIPSCHITZ_TOL]
    return min(bounds) if bounds else math.inf


def select_l(chi: Mapping[str, float], lipschitz: Mapping[str, float], requested: Optional[float] = None) -> float:
    """The requested offset, or the largest admissible one capped at 0.1 m."""
    bound = max_offset(chi, lipschitz)
    if requested is not None:
        return DiffeoConfig(requested, chi, lipschitz).l
    return float(min(bound, 0.1))


@dataclass(frozen=True)
class ControlOutput:
    u: np.ndarray
    epsilon: float = 0.0
    residual: float = 0.0
    branch: str = ""

    def to_dict(self) -> dict:
        return {"u": self.u.tolist(), "epsilon": self.epsilon, "residual": self.residual, "branch": self.branch}


def constraint_terms(grad, g_p, f_p, ddt: float):
    """(a, d) of the barrier constraint a.u >= -alpha*b + ||grad||*C - d."""
    grad = np.asarray(grad, dtype=float)
    return grad @ g_p, float(grad @ np.asarray(f_p, dtype=float) + ddt)


def required_margin(d: float, b_val: float, grad_norm: float, alpha: float, C: float) -> float:
    return -alpha * b_val + grad_norm * C - d


def min_norm_control(a, d: float, b_val: float, grad_norm: float, alpha: float, C: float) -> ControlOutput:
    a = np.asarray(a, dtype=float)
    q = required_margin(d, b_val, grad_norm, alpha, C)
    if grad_norm < settings.zero_gradient:
        return ControlOutput(np.zeros_like(a), residual=-q, branch="zero_gradient")
    if q <= 0.0:
        return ControlOutput(np.zeros_like(a), residual=-q, branch="inactive")
    norm2 = float(a @ a)
    if norm2 == 0.0:
        raise ControllerInfeasibleError(
            f"barrier constraint needs a.u >= {q:.4g} but a = 0",
            required=q,
        )
    u = q * a / norm2
    return ControlOutput(u, residual=float(a @ u - q), branch="active")


def slack_control(a, d: float, b_val: float, grad_norm: float, alpha: float, C: float) -> ControlOutput:
    a = np.asarray(a, dtype=float)
    q = required_margin(d, b_val, grad_norm, alpha, C)
    norm2 = float(a @ a)
    if norm2 == 0.0:
        eps = max(0.0, -q)
        return ControlOutput(np.zeros_like(a), eps, residual=-eps - q, branch="zero_gradient")
    eps = 0.5 * norm2 - q
    if eps >= 0.0:
        u = 0.5 * a
        return ControlOutput(u, eps, residual=float(a @ u - eps - q), branch="slack")
    u = max(0.0, q) * a / norm2
    return ControlOutput(u, 0.0, residual=float(a @ u - q), branch="active")
