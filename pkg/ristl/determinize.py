"""
Determinization

Threshold synthesis that turns each chance/risk predicate into a deterministic
STL predicate h(x, mean) - c >= 0 whose satisfaction set lies inside the
chance/risk satisfaction set, plus the satisfiability checks, the formula
rewrite and the robustness lower bound r.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy import optimize
from scipy.special import logsumexp, softmax

from .config import settings
from .errors import (
    AssumptionError,
    DeterminizationError,
    EmptySetError,
    InfeasibleThresholdError,
    RistlError,
)
from .logic import (
    Formula,
    Predicate,
    PredicateKind,
    conjuncts,
    format_formula,
    map_predicates,
    predicates_of,
    temporal_state_formulas,
)
from .stochastics import (
    AUTO,
    AffinePredicate,
    EmpiricalLaw,
    EvaluationMethod,
    GaussianVector,
    NormBallPredicate,
    RiskPredicate,
    predicate_gradient,
    evaluate_law,
    risk_value,
    sample,
)


# ---------------------------------------------------------------------------
# Domain and terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DomainBox:
    """Axis-aligned compact convex set."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or np.any(lower >= upper):
            raise RistlError(f"domain box needs lower < upper componentwise, got {lower} and {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return int(self.lower.size)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def vertices(self) -> np.ndarray:
        grids = np.meshgrid(*[(lo, hi) for lo, hi in zip(self.lower, self.upper)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def contains(self, x, tol: float = 1e-12):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def bounds(self) -> List[Tuple[float, float]]:
        return list(zip(self.lower.tolist(), self.upper.tolist()))

    def grid(self, n: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, n) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def faces(self) -> List["LinearTerm"]:
        """Affine terms that are nonnegative exactly inside the box."""
        terms = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            terms.append(LinearTerm(e, -self.lower[i], name=f"box_lower_{i}"))
            terms.append(LinearTerm(-e, self.upper[i], name=f"box_upper_{i}"))
        return terms

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class PredicateTerm:
    """h(x, mean) - threshold for one predicate."""

    predicate: RiskPredicate
    mean: np.ndarray
    threshold: float

    @property
    def name(self) -> str:
        return self.predicate.id

    def value(self, x):
        return self.predicate.function.mean_value(x, self.mean) - self.threshold

    def gradient(self, x):
        return predicate_gradient(self.predicate.function, x, self.mean)


@dataclass(frozen=True, eq=False)
class LinearTerm:
    """normal . x + offset"""

    normal: np.ndarray
    offset: float
    name: str = "linear"

    def value(self, x):
        return np.asarray(x, dtype=float) @ self.normal + self.offset

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.normal, x.shape).copy()


Term = Union[PredicateTerm, LinearTerm]


def _safe_term_gradient(term: Term, x: np.ndarray) -> np.ndarray:
    try:
        return term.gradient(x)
    except RistlError:
        return term.gradient(x + settings.gradient_perturbation)


def maximize_min(terms: Sequence[Term], box: DomainBox, eta: float = 50.0) -> Tuple[np.ndarray, float]:
    """Maximize min_k term_k(x) over the box.

    A smooth-min surrogate is maximized from several starts, then the best
    point is refined on the epigraph form with SLSQP.
    """
    if not terms:
        raise RistlError("maximize_min needs at least one term")

    def values(x):
        return np.array([float(term.value(x)) for term in terms])

    def surrogate(x):
        v = values(x)
        w = softmax(-eta * v)
        grad = -sum(wk * _safe_term_gradient(term, x) for wk, term in zip(w, terms))
        return (1.0 / eta) * logsumexp(-eta * v), grad

    starts = [box.center]
    for term in terms:
        if isinstance(term, PredicateTerm) and isinstance(term.predicate.function, NormBallPredicate):
            starts.append(box.clip(term.predicate.function.center(term.mean)))
    best_x, best_value = box.center, -np.inf
    for start in starts:
        result = optimize.minimize(surrogate, start, jac=True, method="L-BFGS-B", bounds=box.bounds())
        x = box.clip(result.x)
        value = float(values(x).min())
        if value > best_value:
            best_x, best_value = x, value

    z0 = np.append(best_x, best_value)
    constraints = [
        {"type": "ineq", "fun": (lambda z, term=term: float(term.value(z[:-1])) - z[-1])}
        for term in terms
    ]
    refined = optimize.minimize(
        lambda z: -z[-1],
        z0,
        method="SLSQP",
        bounds=box.bounds() + [(None, None)],
        constraints=constraints,
        options={"maxiter": 200, "ftol": 1e-12},
    )
    x = box.clip(refined.x[:-1])
    value = float(values(x).min())
    if value > best_value:
        best_x, best_value = x, value
    return best_x, best_value


# ---------------------------------------------------------------------------
# Worst points and inclusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InclusionCertificate:
    predicate: str
    family: str
    threshold: float
    holds: bool
    worst_point: np.ndarray
    worst_value: float
    margin: float

    def to_dict(self) -> dict:
        return {
            "predicate": self.predicate,
            "family": self.family,
            "c": self.threshold,
            "holds": self.holds,
            "worst_point": np.asarray(self.worst_point).tolist(),
            "worst_value": self.worst_value,
            "margin": self.margin,
        }


def _affine_range(fn: AffinePredicate, box: DomainBox) -> Tuple[float, float]:
    low = float(np.sum(np.minimum(fn.v * box.lower, fn.v * box.upper)))
    high = float(np.sum(np.maximum(fn.v * box.lower, fn.v * box.upper)))
    return low, high


def worst_point_affine(fn: AffinePredicate, mean: np.ndarray, c: float, box: DomainBox) -> np.ndarray:
    """Lexicographically smallest minimizer of v.x over {x in box | h(x, mean) >= c}."""
    k = fn.offset(mean)
    s_min, s_max = _affine_range(fn, box)
    target = c - k
    tol = 1e-12 * max(1.0, abs(target))
    if target > s_max + tol:
        raise EmptySetError(
            f"level set h >= {c:.6g} does not meet the domain box",
            threshold=c,
        )
    if not np.any(fn.v != 0.0):
        return box.lower.copy()

    s_star = max(target, s_min)
    lo_terms = np.minimum(fn.v * box.lower, fn.v * box.upper)
    hi_terms = np.maximum(fn.v * box.lower, fn.v * box.upper)
    x = np.empty(box.dim)
    remaining = s_star
    for i in range(box.dim):
        rest_min = float(np.sum(lo_terms[i + 1:]))
        rest_max = float(np.sum(hi_terms[i + 1:]))
        vi = fn.v[i]
        if vi > 0.0:
            xi = (remaining - rest_max) / vi
        elif vi < 0.0:
            xi = (remaining - rest_min) / vi
        else:
            xi = box.lower[i]
        xi = float(np.clip(max(xi, box.lower[i]), box.lower[i], box.upper[i]))
        x[i] = xi
        remaining -= vi * xi
    return x


def _ball_candidates(center: np.ndarray, radius: float, box: DomainBox) -> Tuple[np.ndarray, np.ndarray]:
    """Points of ball(center, radius) within the box that can be farthest from the center.

    Returns (points, on_sphere flags).
    """
    angles = np.linspace(0.0, 2.0 * np.pi, settings.boundary_points, endpoint=False)
    sphere = center + radius * np.column_stack([np.cos(angles), np.sin(angles)])
    sphere = sphere[box.contains(sphere)]
    vertices = box.vertices()
    vertices = vertices[np.linalg.norm(vertices - center, axis=-1) <= radius]
    inner = [box.clip(center)] if np.linalg.norm(box.clip(center) - center) <= radius else []
    points = np.vstack([p for p in (sphere, vertices, np.array(inner).reshape(-1, 2)) if len(p)])
    flags = np.zeros(len(points), dtype=bool)
    flags[: len(sphere)] = True
    return points, flags


def check_inclusion(
    pred: RiskPredicate,
    c: float,
    box: DomainBox,
    X: GaussianVector,
    method: EvaluationMethod = AUTO,
) -> InclusionCertificate:
    """Does {x in box | h(x, mean) - c >= 0} lie inside the chance/risk set of ``pred``?"""
    fn = pred.function
    spec = pred.spec
    if isinstance(fn, AffinePredicate):
        x_star = worst_point_affine(fn, X.mean, c, box)
        value = float(risk_value(fn, x_star, X, spec, method))
        margin = float(spec.margin(value))
        return InclusionCertificate(pred.id, "affine", c, margin >= 0.0, x_star, value, margin)

    center = fn.center(X.mean)
    radius = fn.epsilon - c
    inside = box.clip(center)
    if radius < 0.0 or np.linalg.norm(inside - center) > radius:
        raise EmptySetError(f"level set of {pred.id} at c={c:.6g} does not meet the domain box", predicate=pred.id, threshold=c)

    points, on_sphere = _ball_candidates(center, radius, box)
    sigma = X.isotropic_sigma(fn.selector)
    if sigma is not None and method.kind != "monte_carlo":
        distances = np.linalg.norm(points - center, axis=-1)
        worst = int(np.argmax(distances))
        x_star = points[worst]
        value = float(risk_value(fn, x_star, X, spec, method))
    else:
        mc = method if method.kind == "monte_carlo" else EvaluationMethod.monte_carlo(method.n, method.seed)
        x_star, value = _worst_by_sampling(pred, points, on_sphere, center, radius, X, mc)
    margin = float(spec.margin(value))
    return InclusionCertificate(pred.id, "norm_ball", c, margin >= 0.0, np.asarray(x_star), value, margin)


def _worst_by_sampling(pred, points, on_sphere, center, radius, X, method):
    """Worst candidate under shared samples, refined along the sphere."""
    fn = pred.function
    spec = pred.spec
    draws = sample(X, method.n, method.seed)

    def margin_at(x):
        return float(spec.margin(evaluate_law(EmpiricalLaw(fn.value(x, draws)), spec)))

    margins = np.array([margin_at(p) for p in points])
    worst = int(np.argmin(margins))
    x_star = points[worst]
    if on_sphere[worst]:
        theta0 = math.atan2(x_star[1] - center[1], x_star[0] - center[0])
        step = 2.0 * np.pi / settings.boundary_points

        def objective(theta):
            return margin_at(center + radius * np.array([math.cos(theta), math.sin(theta)]))

        result = optimize.minimize_scalar(objective, bounds=(theta0 - step, theta0 + step), method="bounded")
        candidate = center + radius * np.array([math.cos(result.x), math.sin(result.x)])
        if result.fun < margins[worst]:
            x_star = candidate
    value = float(risk_value(fn, x_star, X, spec, method))
    return x_star, value


# ---------------------------------------------------------------------------
# Threshold synthesis
# ---------------------------------------------------------------------------

def value_range(fn, mean: np.ndarray, box: DomainBox) -> Tuple[float, float]:
    """(min, max) of h(x, mean) over the box."""
    if isinstance(fn, AffinePredicate):
        low, high = _affine_range(fn, box)
        k = fn.offset(mean)
        return low + k, high + k
    center = fn.center(mean)
    nearest = np.linalg.norm(box.clip(center) - center)
    farthest = np.max(np.linalg.norm(box.vertices() - center, axis=-1))
    return fn.epsilon - float(farthest), fn.epsilon - float(nearest)


def maximizer(fn, mean: np.ndarray, box: DomainBox) -> np.ndarray:
    """Point of the box maximizing h(x, mean)."""
    if isinstance(fn, AffinePredicate):
        return np.where(fn.v > 0.0, box.upper, np.where(fn.v < 0.0, box.lower, box.center))
    return box.clip(fn.center(mean))


def minimal_c(
    pred: RiskPredicate,
    box: DomainBox,
    X: GaussianVector,
    tol: float = settings.bisection_tol,
    method: EvaluationMethod = AUTO,
) -> float:
    """Smallest threshold (within tol) whose level set is contained in the chance/risk set."""
    c_lo, c_hi = value_range(pred.function, X.mean, box)
    if check_inclusion(pred, c_lo, box, X, method).holds:
        logger.debug(f"{pred.id}: whole domain box is included, c = {c_lo:.6g}")
        return c_lo
    top = check_inclusion(pred, c_hi, box, X, method)
    if not top.holds:
        raise InfeasibleThresholdError(
            f"{pred.id}: requirement fails even at the best point of the domain (margin {top.margin:.4g})",
            predicate=pred.id,
        )

    if isinstance(pred.function, AffinePredicate):
        def margin(c):
            return check_inclusion(pred, c, box, X, method).margin

        root = optimize.brentq(margin, c_lo, c_hi, xtol=tol * 1e-3)
        c = root
        step = tol * 1e-2
        for _ in range(100):
            if check_inclusion(pred, c, box, X, method).holds:
                break
            c = min(c + step, c_hi)
        logger.debug(f"{pred.id}: affine threshold root {root:.8g}, returning {c:.8g}")
        return float(c)

    lo, hi = c_lo, c_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if check_inclusion(pred, mid, box, X, method).holds:
            hi = mid
        else:
            lo = mid
    logger.debug(f"{pred.id}: bisection threshold in [{lo:.6g}, {hi:.6g}]")
    return float(hi)


# ---------------------------------------------------------------------------
# Satisfiability (Assumption 1)
# ---------------------------------------------------------------------------

@dataclass
class Assumption1Report:
    ok: bool
    witnesses: Dict[str, dict] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "witnesses": self.witnesses, "failures": self.failures}


def _state_conjunctions(f: Formula) -> List[Tuple[str, List[str]]]:
    found = []
    for path, node in temporal_state_formulas(f):
        members = conjuncts(node)
        if all(isinstance(m, Predicate) for m in members):
            found.append((path, [m.id for m in members]))
        else:
            logger.debug(f"Skipping non-conjunctive state formula at {path}: {format_formula(node)}")
    return found


def check_assumption1(
    formula: Formula,
    predicates: Mapping[str, RiskPredicate],
    levels: Mapping[str, float],
    box: DomainBox,
    mean: np.ndarray,
    extra_conjunctions: Sequence[Tuple[str, Sequence[str]]] = (),
) -> Assumption1Report:
    """Check that each predicate and each state conjunction can be strictly satisfied in the box.

    ``levels`` holds the full offset per predicate (c, or c + chi for the
    modified formula).
    """
    report = Assumption1Report(ok=True)
    for pid in predicates_of(formula):
        fn = predicates[pid].function
        x = maximizer(fn, mean, box)
        value = float(fn.mean_value(x, mean)) - levels[pid]
        report.witnesses[pid] = {"point": x.tolist(), "value": value}
        if value <= 0.0:
            report.ok = False
            report.failures.append(f"{pid}: max over the domain of h - c is {value:.4g} <= 0")

    groups = _state_conjunctions(formula) + [(name, list(ids)) for name, ids in extra_conjunctions]
    for name, ids in groups:
        if len(ids) < 2:
            continue
        terms = [PredicateTerm(predicates[pid], mean, levels[pid]) for pid in ids]
        x, value = maximize_min(terms, box)
        report.witnesses[name] = {"point": x.tolist(), "value": value, "members": list(ids)}
        if value <= 0.0:
            report.ok = False
            report.failures.append(f"{name}: conjunction {' & '.join(ids)} has no strictly feasible point (best {value:.4g})")
    return report


def _all_ids(formula: Formula, extra_conjunctions: Sequence[Tuple[str, Sequence[str]]]) -> List[str]:
    ids = predicates_of(formula)
    for _, group in extra_conjunctions:
        ids.extend(pid for pid in group if pid not in ids)
    return ids


def choose_chi(
    formula: Formula,
    predicates: Mapping[str, RiskPredicate],
    thresholds: Mapping[str, float],
    box: DomainBox,
    mean: np.ndarray,
    extra_conjunctions: Sequence[Tuple[str, Sequence[str]]] = (),
    overrides: Optional[Mapping[str, float]] = None,
) -> Tuple[Dict[str, float], Assumption1Report]:
    """Margins chi_m, halved until the modified formula still satisfies Assumption 1."""
    overrides = dict(overrides or {})
    chis: Dict[str, float] = {}
    for pid in _all_ids(formula, extra_conjunctions):
        if pid in overrides:
            chis[pid] = float(overrides[pid])
            continue
        _, high = value_range(predicates[pid].function, mean, box)
        slack = high - thresholds[pid]
        if slack <= 0.0:
            raise AssumptionError(f"{pid}: no slack left above c = {thresholds[pid]:.6g}", predicate=pid)
        chis[pid] = settings.chi_fraction * slack

    for attempt in range(settings.chi_max_halvings + 1):
        levels = {pid: thresholds[pid] + chis[pid] for pid in chis}
        report = check_assumption1(formula, predicates, levels, box, mean, extra_conjunctions)
        if report.ok:
            return chis, report
        if overrides and set(overrides) >= set(chis):
            break
        logger.warning(f"Assumption 1 fails for the modified formula, halving chi (attempt {attempt + 1})")
        chis = {pid: (value if pid in overrides else 0.5 * value) for pid, value in chis.items()}
    raise AssumptionError(
        "modified formula is not satisfiable for any tried chi: " + "; ".join(report.failures),
        failures=report.failures,
    )


# ---------------------------------------------------------------------------
# Rewrite and bounds
# ---------------------------------------------------------------------------

def _assumption_flags(assumptions) -> Tuple[Optional[bool], Optional[bool]]:
    if assumptions is None:
        return None, None
    if hasattr(assumptions, "assumption1_ok"):
        return assumptions.assumption1_ok, getattr(assumptions, "assumption2_ok", None)
    first, second = assumptions
    return first, second


def determinize(
    f: Formula,
    thresholds: Mapping[str, float],
    chis: Mapping[str, float],
    assumptions: Union[Tuple[bool, bool], "DeterminizationResult", None] = None,
) -> Tuple[Formula, Formula]:
    """Rewrite chance/risk leaves into STL leaves at c (phi) and c + chi (phi bar).

    ``assumptions`` is either the pair (assumption1_ok, assumption2_ok) or any
    object exposing those two attributes, such as a DeterminizationResult.
    The rewrite is refused unless both are known to hold.
    """
    satisfiable, included = _assumption_flags(assumptions)
    if satisfiable is None or included is None:
        raise DeterminizationError(
            "satisfiability and inclusion have not been checked",
            help="Run the threshold synthesis first and pass its assumption flags.",
        )
    if not (satisfiable and included):
        failed = [name for name, ok in (("assumption1", satisfiable), ("assumption2", included)) if not ok]
        raise DeterminizationError(f"cannot determinize: {', '.join(failed)} failed", failed=failed)

    def rewrite(offset_of):
        def leaf(pred: Predicate) -> Predicate:
            if pred.kind is PredicateKind.STL:
                raise DeterminizationError(f"predicate {pred.id!r} is already deterministic", predicate=pred.id)
            if pred.id not in thresholds or pred.id not in chis:
                raise DeterminizationError(f"no threshold synthesized for {pred.id!r}", predicate=pred.id)
            return Predicate(pred.id, PredicateKind.STL, offset_of(pred.id))

        return leaf

    phi = map_predicates(f, rewrite(lambda pid: float(thresholds[pid])))
    phi_bar = map_predicates(f, rewrite(lambda pid: float(thresholds[pid] + chis[pid])))
    return phi, phi_bar


@dataclass(frozen=True)
class RBound:
    r: float
    per_predicate: Dict[str, float]
    level_shift: float

    def to_dict(self) -> dict:
        return {"r": self.r, "per_predicate": self.per_predicate, "level_shift": self.level_shift}


def robustness_bound_r(
    predicates: Mapping[str, RiskPredicate],
    thresholds: Mapping[str, float],
    eps_r: float,
    alpha: float,
    box: DomainBox,
    X: GaussianVector,
    method: EvaluationMethod = AUTO,
) -> RBound:
    """Lower bound r on the RiSTL robustness implied by b >= eps_r / alpha.

    For each predicate the largest r such that the relaxed requirement still
    contains {h - c >= eps_r/alpha} is the inclusion margin at that level.
    """
    if eps_r < 0.0 or alpha <= 0.0:
        raise RistlError(f"need eps_r >= 0 and alpha > 0, got {eps_r} and {alpha}")
    shift = eps_r / alpha
    per_predicate = {}
    for pid, c in thresholds.items():
        certificate = check_inclusion(predicates[pid], c + shift, box, X, method)
        per_predicate[pid] = certificate.margin
    r = min(per_predicate.values()) if per_predicate else 0.0
    logger.info(f"Robustness bound r = {r:.6g} at level shift {shift:.6g}")
    return RBound(float(r), per_predicate, shift)


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

@dataclass
class DeterminizationResult:
    thresholds: Dict[str, float]
    chis: Dict[str, float]
    certificates: Dict[str, InclusionCertificate]
    assumption1: Assumption1Report
    assumption2_ok: bool
    phi: Formula
    phi_bar: Formula
    lipschitz: Dict[str, float]
    comparison: Dict[str, dict] = field(default_factory=dict)

    @property
    def assumption1_ok(self) -> bool:
        return self.assumption1.ok

    @property
    def l_max(self) -> float:
        return min(self.chis[pid] / self.lipschitz[pid] for pid in self.chis)

    def levels(self, modified: bool = False) -> Dict[str, float]:
        return {pid: c + (self.chis[pid] if modified else 0.0) for pid, c in self.thresholds.items()}

    def to_dict(self) -> dict:
        predicates = {}
        for pid, c in self.thresholds.items():
            cert = self.certificates[pid]
            predicates[pid] = {
                "c": c,
                "chi": self.chis.get(pid),
                "family": cert.family,
                "worst_point": np.asarray(cert.worst_point).tolist(),
                "worst_value": cert.worst_value,
                "margin": cert.margin,
                "lipschitz": self.lipschitz[pid],
            }
        return {
            "predicates": predicates,
            "assumption1_ok": self.assumption1_ok,
            "assumption2_ok": self.assumption2_ok,
            "assumption1": self.assumption1.to_dict(),
            "phi": format_formula(self.phi),
            "phi_bar": format_formula(self.phi_bar),
            "phi_thresholds": self.levels(False),
            "phi_bar_thresholds": self.levels(True),
            "l_max": self.l_max,
            "reference_comparison": self.comparison,
        }


def synthesize(
    formula: Formula,
    predicates: Mapping[str, RiskPredicate],
    box: DomainBox,
    X: GaussianVector,
    extra_conjunctions: Sequence[Tuple[str, Sequence[str]]] = (),
    chi_overrides: Optional[Mapping[str, float]] = None,
    method: EvaluationMethod = AUTO,
    tol: float = settings.bisection_tol,
) -> DeterminizationResult:
    """Thresholds, margins, certificates and both determinized formulas."""
    ids = _all_ids(formula, extra_conjunctions)

    thresholds: Dict[str, float] = {}
    certificates: Dict[str, InclusionCertificate] = {}
    for pid in ids:
        pred = predicates[pid]
        c = minimal_c(pred, box, X, tol, method)
        certificates[pid] = check_inclusion(pred, c, box, X, method)
        thresholds[pid] = c
        logger.info(f"Threshold for {pid} ({pred.spec.kind.value}): c = {c:.6g}")

    assumption2_ok = all(cert.holds for cert in certificates.values())
    base_report = check_assumption1(formula, predicates, thresholds, box, X.mean, extra_conjunctions)
    if not base_report.ok:
        raise AssumptionError(
            "determinized formula is not satisfiable: " + "; ".join(base_report.failures),
            failures=base_report.failures,
        )
    chis, report = choose_chi(formula, predicates, thresholds, box, X.mean, extra_conjunctions, chi_overrides)
    phi, phi_bar = determinize(formula, thresholds, chis, assumptions=(report.ok, assumption2_ok))
    lipschitz = {pid: predicates[pid].function.lipschitz for pid in ids}
    return DeterminizationResult(
        thresholds=thresholds,
        chis=chis,
        certificates=certificates,
        assumption1=report,
        assumption2_ok=assumption2_ok,
        phi=phi,
        phi_bar=phi_bar,
        lipschitz=lipschitz,
    )


def compare_references(
    result: DeterminizationResult,
    predicates: Mapping[str, RiskPredicate],
    box: DomainBox,
    alternate: GaussianVector,
    references: Mapping[str, float],
    alternate_label: str,
    method: EvaluationMethod = AUTO,
) -> Dict[str, dict]:
    """Computed thresholds next to reference values and the alternate covariance reading."""
    comparison = {}
    for pid, c in result.thresholds.items():
        try:
            other = minimal_c(predicates[pid], box, alternate, method=method)
        except RistlError as e:
            other = None
            logger.warning(f"{pid}: no threshold under the {alternate_label} reading ({e.message})")
        entry = {"computed": c, alternate_label: other}
        if pid in references:
            entry["reference"] = references[pid]
            if abs(references[pid] - c) > settings.reference_tolerance:
                logger.warning(f"{pid}: computed c = {c:.4g} differs from reference {references[pid]:.4g}")
        comparison[pid] = entry
    result.comparison = comparison
    return comparison
