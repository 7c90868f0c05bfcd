"""
Stochastic predicates

Gaussian environment vectors, predicate function families, their scalar
push-forward laws and the chance / EV / VaR / CVaR evaluations on them.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache, singledispatch
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from numpy.polynomial.legendre import leggauss
from scipy import stats

from .config import settings
from .errors import DistributionError, GradientError


# ---------------------------------------------------------------------------
# Environment
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianVector:
    """Environment random vector X ~ N(mean, covariance)."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise DistributionError(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise DistributionError("covariance matrix is not symmetric")
        scale = max(1.0, float(np.max(np.abs(cov))) if cov.size else 1.0)
        eigenvalues = np.linalg.eigvalsh(cov) if cov.size else np.zeros(0)
        if eigenvalues.size and eigenvalues.min() < -1e-10 * scale:
            raise DistributionError(
                f"covariance matrix is not positive semidefinite (min eigenvalue {eigenvalues.min():.3g})"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", 0.5 * (cov + cov.T))

    @classmethod
    def from_diagonal(cls, mean: Sequence[float], diagonal: Sequence[float], reading: str = "variance") -> "GaussianVector":
        """Build from diagonal entries read as variances or standard deviations."""
        diag = np.asarray(diagonal, dtype=float)
        if reading == "std":
            diag = diag ** 2
        elif reading != "variance":
            raise DistributionError(f"unknown covariance reading {reading!r}")
        return cls(np.asarray(mean, dtype=float), np.diag(diag))

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    def factor(self) -> np.ndarray:
        """Matrix F with F @ F.T equal to the covariance."""
        eigenvalues, eigenvectors = np.linalg.eigh(self.covariance)
        return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))

    def block(self, index: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        index = list(index)
        if any(i < 0 or i >= self.dim for i in index):
            raise DistributionError(f"selector {index} out of range for environment of size {self.dim}")
        return self.mean[index], self.covariance[np.ix_(index, index)]

    def isotropic_sigma(self, index: Sequence[int]) -> Optional[float]:
        """Standard deviation when the selected block is sigma^2 * I, else None."""
        _, cov = self.block(index)
        diag = np.diag(cov)
        off = cov - np.diag(diag)
        if np.allclose(off, 0.0, atol=1e-12) and np.allclose(diag, diag[0], rtol=1e-9, atol=1e-14):
            return float(math.sqrt(max(diag[0], 0.0)))
        return None


def sample(X: GaussianVector, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` rows of X, deterministic in ``seed``."""
    if n < 1:
        raise DistributionError(f"sample count must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, X.dim))
    return X.mean + z @ X.factor().T


# ---------------------------------------------------------------------------
# Risk annotations
# ---------------------------------------------------------------------------

class RiskKind(str, Enum):
    CHANCE = "chance"
    EV = "ev"
    VAR = "var"
    CVAR = "cvar"


def _check_probability(name: str, value: Optional[float]) -> None:
    if value is None or not (0.0 < value < 1.0):
        raise DistributionError(f"{name} must lie strictly in (0, 1), got {value}")


@dataclass(frozen=True)
class RiskSpec:
    """Chance level delta, or a risk metric with bound gamma."""

    kind: RiskKind
    delta: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", RiskKind(self.kind))
        if self.kind is RiskKind.CHANCE:
            _check_probability("delta", self.delta)
            return
        if self.gamma is None:
            raise DistributionError(f"{self.kind.value} risk predicates need gamma")
        if self.kind in (RiskKind.VAR, RiskKind.CVAR):
            _check_probability("beta", self.beta)

    @classmethod
    def chance(cls, delta: float) -> "RiskSpec":
        return cls(RiskKind.CHANCE, delta=delta)

    @classmethod
    def ev(cls, gamma: float) -> "RiskSpec":
        return cls(RiskKind.EV, gamma=gamma)

    @classmethod
    def var(cls, beta: float, gamma: float) -> "RiskSpec":
        return cls(RiskKind.VAR, beta=beta, gamma=gamma)

    @classmethod
    def cvar(cls, beta: float, gamma: float) -> "RiskSpec":
        return cls(RiskKind.CVAR, beta=beta, gamma=gamma)

    @property
    def is_chance(self) -> bool:
        return self.kind is RiskKind.CHANCE

    def margin(self, value):
        """Signed satisfaction margin: P - delta for chance, gamma - R(-h) otherwise."""
        if self.is_chance:
            return value - self.delta
        return self.gamma - value

    def holds(self, value) -> bool:
        return bool(np.all(self.margin(value) >= 0.0))

    def relaxed(self, r: float) -> "RiskSpec":
        """Requirement tightened by r (delta + r, or gamma - r)."""
        if self.is_chance:
            return replace(self, delta=self.delta + r)
        return replace(self, gamma=self.gamma - r)

    def to_dict(self) -> dict:
        data = {"kind": self.kind.value}
        for key in ("delta", "beta", "gamma"):
            if getattr(self, key) is not None:
                data[key] = getattr(self, key)
        return data


# ---------------------------------------------------------------------------
# Predicate function families
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffinePredicate:
    """h(x, X) = v.x + w.X + b0"""

    v: np.ndarray
    w: np.ndarray
    b0: float = 0.0
    family: str = field(default="affine", init=False)

    def __post_init__(self) -> None:
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        w = np.atleast_1d(np.asarray(self.w, dtype=float))
        if not (np.any(v != 0.0) or np.any(w != 0.0)):
            raise DistributionError("affine predicate needs a nonzero state or environment coefficient")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b0", float(self.b0))

    def offset(self, mean: np.ndarray) -> float:
        return float(self.w @ mean + self.b0)

    def value(self, x, X):
        """h evaluated for state(s) x and environment realisation(s) X."""
        x = np.asarray(x, dtype=float)
        X = np.asarray(X, dtype=float)
        return x @ self.v + X @ self.w + self.b0

    def mean_value(self, x, mean):
        return np.asarray(x, dtype=float) @ self.v + self.offset(mean)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.v, x.shape).copy()

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.v))

    def to_dict(self) -> dict:
        return {"family": "affine", "v": self.v.tolist(), "w": self.w.tolist(), "b0": self.b0}


@dataclass(frozen=True, eq=False)
class NormBallPredicate:
    """h(x, X) = epsilon - ||x - X[selector]||"""

    selector: Tuple[int, int]
    epsilon: float
    family: str = field(default="norm_ball", init=False)

    def __post_init__(self) -> None:
        if self.epsilon <= 0.0:
            raise DistributionError(f"norm-ball radius must be positive, got {self.epsilon}")
        object.__setattr__(self, "selector", tuple(int(i) for i in self.selector))
        object.__setattr__(self, "epsilon", float(self.epsilon))

    def center(self, mean: np.ndarray) -> np.ndarray:
        return np.asarray(mean, dtype=float)[list(self.selector)]

    def value(self, x, X):
        X = np.asarray(X, dtype=float)
        return self.epsilon - np.linalg.norm(np.asarray(x, dtype=float) - X[..., list(self.selector)], axis=-1)

    def mean_value(self, x, mean):
        return self.epsilon - np.linalg.norm(np.asarray(x, dtype=float) - self.center(mean), axis=-1)

    def gradient(self, x, mean):
        diff = np.asarray(x, dtype=float) - self.center(mean)
        dist = np.linalg.norm(diff, axis=-1, keepdims=True)
        if np.any(dist == 0.0):
            raise GradientError("norm-ball gradient requested at the ball center")
        return -diff / dist

    @property
    def lipschitz(self) -> float:
        return 1.0

    def to_dict(self) -> dict:
        return {"family": "norm_ball", "selector": list(self.selector), "epsilon": self.epsilon}


PredicateFunction = Union[AffinePredicate, NormBallPredicate]


def predicate_gradient(fn: PredicateFunction, x, mean):
    if isinstance(fn, AffinePredicate):
        return fn.gradient(x)
    return fn.gradient(x, mean)


@dataclass(frozen=True, eq=False)
class RiskPredicate:
    """A named predicate function together with its chance or risk annotation."""

    id: str
    function: PredicateFunction
    spec: RiskSpec

    def to_dict(self) -> dict:
        return {"id": self.id, **self.function.to_dict(), "spec": self.spec.to_dict()}


# ---------------------------------------------------------------------------
# Scalar laws of h(x, X)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvaluationMethod:
    kind: str = "auto"  # auto | closed_form | monte_carlo | quadrature
    n: int = settings.mc_samples
    seed: int = settings.mc_seed

    @classmethod
    def monte_carlo(cls, n: int, seed: int) -> "EvaluationMethod":
        return cls("monte_carlo", n, seed)


AUTO = EvaluationMethod()
CLOSED_FORM = EvaluationMethod("closed_form")
QUADRATURE = EvaluationMethod("quadrature")


@dataclass(frozen=True, eq=False)
class GaussianLaw:
    """h ~ N(mu, sigma^2); sigma = 0 is a point mass. ``mu`` may be an array."""

    mu: Union[float, np.ndarray]
    sigma: float


@dataclass(frozen=True, eq=False)
class EmpiricalLaw:
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.sort(np.asarray(self.samples, dtype=float).ravel())
        if samples.size == 0:
            raise DistributionError("empirical law needs at least one sample")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True, eq=False)
class RadialLaw:
    """h = epsilon - R where R is Rice distributed (distance to an isotropic Gaussian point)."""

    epsilon: float
    distance: Union[float, np.ndarray]
    sigma: float


ScalarDistribution = Union[GaussianLaw, EmpiricalLaw, RadialLaw]


def _out(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


@lru_cache(maxsize=8)
def _gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def _check_beta(beta: float) -> None:
    _check_probability("beta", beta)


def _tail_quadrature(ppf, beta: float) -> np.ndarray:
    """Average of the loss quantile function over (beta, 1)."""
    nodes, weights = _gauss_legendre(settings.quadrature_nodes)
    levels = beta + (1.0 - beta) * (nodes + 1.0) / 2.0
    return 0.5 * (ppf(levels) @ weights)


def _loss_index(n: int, beta: float) -> int:
    k = int(math.ceil(beta * n - 1e-9))
    return min(max(k, 1), n) - 1


@singledispatch
def chance(d) -> float:
    """P(h >= 0)."""
    raise DistributionError(f"unsupported distribution {type(d).__name__}")


@chance.register
def _(d: GaussianLaw):
    mu = np.asarray(d.mu, dtype=float)
    if d.sigma == 0.0:
        return _out(mu >= 0.0)
    return _out(stats.norm.cdf(mu / d.sigma))


@chance.register
def _(d: EmpiricalLaw):
    return float(np.mean(d.samples >= 0.0))


@chance.register
def _(d: RadialLaw):
    distance = np.asarray(d.distance, dtype=float)
    if d.sigma == 0.0:
        return _out(distance <= d.epsilon)
    return _out(stats.rice.cdf(d.epsilon, distance / d.sigma, scale=d.sigma))


@singledispatch
def ev_neg(d) -> float:
    """E[-h]."""
    raise DistributionError(f"unsupported distribution {type(d).__name__}")


@ev_neg.register
def _(d: GaussianLaw):
    return _out(-np.asarray(d.mu, dtype=float))


@ev_neg.register
def _(d: EmpiricalLaw):
    return float(-np.mean(d.samples))


@ev_neg.register
def _(d: RadialLaw):
    distance = np.asarray(d.distance, dtype=float)
    if d.sigma == 0.0:
        return _out(distance - d.epsilon)
    return _out(stats.rice.mean(distance / d.sigma, scale=d.sigma) - d.epsilon)


@singledispatch
def var_beta(d, beta: float) -> float:
    """beta-quantile of the loss -h."""
    raise DistributionError(f"unsupported distribution {type(d).__name__}")


@var_beta.register
def _(d: GaussianLaw, beta: float):
    _check_beta(beta)
    return _out(-np.asarray(d.mu, dtype=float) + d.sigma * stats.norm.ppf(beta))


@var_beta.register
def _(d: EmpiricalLaw, beta: float):
    _check_beta(beta)
    losses = -d.samples[::-1]
    return float(losses[_loss_index(losses.size, beta)])


@var_beta.register
def _(d: RadialLaw, beta: float):
    _check_beta(beta)
    distance = np.asarray(d.distance, dtype=float)
    if d.sigma == 0.0:
        return _out(distance - d.epsilon)
    return _out(stats.rice.ppf(beta, distance / d.sigma, scale=d.sigma) - d.epsilon)


@singledispatch
def cvar_beta(d, beta: float) -> float:
    """Expected loss beyond VaR_beta."""
    raise DistributionError(f"unsupported distribution {type(d).__name__}")


@cvar_beta.register
def _(d: GaussianLaw, beta: float):
    _check_beta(beta)
    tail = stats.norm.pdf(stats.norm.ppf(beta)) / (1.0 - beta)
    return _out(-np.asarray(d.mu, dtype=float) + d.sigma * tail)


@cvar_beta.register
def _(d: EmpiricalLaw, beta: float):
    _check_beta(beta)
    losses = -d.samples[::-1]
    threshold = losses[_loss_index(losses.size, beta)]
    tail = losses[losses > threshold]
    if tail.size == 0:
        raise DistributionError(
            f"empty CVaR tail at beta={beta}: no sample exceeds VaR {threshold:.6g}",
            help="Use more samples or a continuous law.",
        )
    return float(np.mean(tail))


@cvar_beta.register
def _(d: RadialLaw, beta: float):
    _check_beta(beta)
    distance = np.asarray(d.distance, dtype=float)
    if d.sigma == 0.0:
        return _out(distance - d.epsilon)
    b = distance / d.sigma

    def ppf(levels):
        return stats.rice.ppf(levels, b[..., None], scale=d.sigma)

    return _out(_tail_quadrature(ppf, beta) - d.epsilon)


# ---------------------------------------------------------------------------
# Push-forward and dispatch
# ---------------------------------------------------------------------------

def _monte_carlo_law(fn: PredicateFunction, x, X: GaussianVector, method: EvaluationMethod) -> EmpiricalLaw:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DistributionError("Monte-Carlo evaluation takes one state at a time")
    draws = sample(X, method.n, method.seed)
    return EmpiricalLaw(fn.value(x, draws))


def pushforward(fn: PredicateFunction, x, X: GaussianVector, method: EvaluationMethod = AUTO) -> ScalarDistribution:
    """Distribution of h(x, X) for a state (or a batch of states along the first axes)."""
    if isinstance(fn, AffinePredicate):
        if fn.w.size != X.dim:
            raise DistributionError(f"environment coefficient has length {fn.w.size}, expected {X.dim}")
        if method.kind in ("auto", "closed_form"):
            sigma = float(math.sqrt(max(fn.w @ X.covariance @ fn.w, 0.0)))
            return GaussianLaw(_out(fn.mean_value(x, X.mean)), sigma)
        if method.kind == "monte_carlo":
            return _monte_carlo_law(fn, x, X, method)
        raise DistributionError("quadrature evaluation applies to norm-ball predicates only")

    X.block(fn.selector)
    if method.kind == "closed_form":
        raise DistributionError("closed-form evaluation is only available for affine predicates")
    if method.kind == "monte_carlo":
        return _monte_carlo_law(fn, x, X, method)
    sigma = X.isotropic_sigma(fn.selector)
    if sigma is None:
        if method.kind == "quadrature":
            raise DistributionError("quadrature needs an isotropic covariance block for the selected coordinates")
        logger.debug(f"Non-isotropic block for selector {fn.selector}, using Monte Carlo")
        return _monte_carlo_law(fn, x, X, method)
    distance = np.linalg.norm(np.asarray(x, dtype=float) - fn.center(X.mean), axis=-1)
    return RadialLaw(fn.epsilon, _out(distance), sigma)


def evaluate_law(law: ScalarDistribution, spec: RiskSpec):
    """P(h >= 0) for chance annotations, R(-h) otherwise."""
    if spec.kind is RiskKind.CHANCE:
        return chance(law)
    if spec.kind is RiskKind.EV:
        return ev_neg(law)
    if spec.kind is RiskKind.VAR:
        return var_beta(law, spec.beta)
    return cvar_beta(law, spec.beta)


def risk_value(fn: PredicateFunction, x, X: GaussianVector, spec: RiskSpec, method: EvaluationMethod = AUTO):
    x = np.asarray(x, dtype=float)
    if x.ndim > 1 and _needs_sampling(fn, X, method):
        flat = x.reshape(-1, x.shape[-1])
        values = [evaluate_law(pushforward(fn, row, X, method), spec) for row in flat]
        return np.asarray(values).reshape(x.shape[:-1])
    return evaluate_law(pushforward(fn, x, X, method), spec)


def _needs_sampling(fn: PredicateFunction, X: GaussianVector, method: EvaluationMethod) -> bool:
    if method.kind == "monte_carlo":
        return True
    return isinstance(fn, NormBallPredicate) and method.kind == "auto" and X.isotropic_sigma(fn.selector) is None
