"""
Scenario loading

Reads a TOML scenario file, validates it against the pydantic schema and
builds the runtime Scenario used by the pipeline.
"""

import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
from loguru import logger
from pydantic import ValidationError

from .control import UnicycleState
from .determinize import DomainBox
from .errors import RistlError, ScenarioError
from .logic import PredicateKind, parse_formula
from .schemas import DisturbanceSection, GaussianSection, PredicateSection, ScenarioFile
from .sim import (
    BoundedNoise,
    ConstantDisturbance,
    ControllerConfig,
    Dynamics,
    IntegratorConfig,
    SaturatedSpring,
    Scenario,
    Subtask,
    ZeroDisturbance,
)
from .stochastics import AffinePredicate, GaussianVector, NormBallPredicate, RiskPredicate, RiskSpec


def _line_of(text: str, loc: tuple) -> Optional[int]:
    """Best-effort line number of the key at ``loc`` in the TOML source."""
    keys = [part for part in loc if isinstance(part, str)]
    if not keys:
        return None
    pattern = re.compile(rf"^\s*{re.escape(keys[-1])}\s*=|^\s*\[+\s*{re.escape(keys[-1])}\s*\]+", re.MULTILINE)
    match = pattern.search(text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _gaussian(section: GaussianSection, reading: Optional[str] = None) -> GaussianVector:
    if section.diagonal is not None:
        return GaussianVector.from_diagonal(section.mean, section.diagonal, reading or section.covariance_reading)
    return GaussianVector(np.asarray(section.mean), np.asarray(section.covariance))


def _predicate(section: PredicateSection) -> RiskPredicate:
    if section.family == "affine":
        fn = AffinePredicate(np.asarray(section.v), np.asarray(section.w), section.b0)
    else:
        fn = NormBallPredicate(tuple(section.selector), section.epsilon)
    spec = RiskSpec(section.risk, delta=section.delta, beta=section.beta, gamma=section.gamma)
    return RiskPredicate(section.id, fn, spec)


def _disturbance(section: DisturbanceSection, bound: float, seed: int):
    if section.kind == "constant":
        if section.vector is None or len(section.vector) != 2:
            raise ScenarioError("constant disturbance needs a two-entry vector", location="dynamics.disturbance.vector")
        return ConstantDisturbance(tuple(section.vector))
    if section.kind == "saturated_spring":
        return SaturatedSpring(section.gain)
    if section.kind == "bounded_noise":
        return BoundedNoise(bound, section.seed if section.seed is not None else seed)
    return ZeroDisturbance()


def build_scenario(doc: ScenarioFile) -> Scenario:
    """Runtime objects from a validated scenario document."""
    gaussian = _gaussian(doc.gaussian)
    alternate = None
    if doc.gaussian.compare_readings and doc.gaussian.diagonal is not None:
        other = "std" if doc.gaussian.covariance_reading == "variance" else "variance"
        alternate = _gaussian(doc.gaussian, other)

    predicates: Dict[str, RiskPredicate] = {}
    for section in doc.predicate:
        pred = _predicate(section)
        if section.family == "affine" and pred.function.w.size != gaussian.dim:
            raise ScenarioError(
                f"predicate {section.id}: w has {pred.function.w.size} entries, environment has {gaussian.dim}",
                location=f"predicate.{section.id}.w",
            )
        if section.family == "norm_ball":
            gaussian.block(pred.function.selector)
        predicates[section.id] = pred

    kinds = {pid: PredicateKind.CHANCE if pred.spec.is_chance else PredicateKind.RISK for pid, pred in predicates.items()}
    formula = parse_formula(doc.formula.text, known=kinds)
    box = DomainBox(np.asarray(doc.domain.lower), np.asarray(doc.domain.upper))
    for pred in predicates.values():
        if isinstance(pred.function, AffinePredicate) and pred.function.v.size != box.dim:
            raise ScenarioError(
                f"predicate {pred.id}: v has {pred.function.v.size} entries, domain has {box.dim}",
                location=f"predicate.{pred.id}.v",
            )

    dyn = doc.dynamics
    dynamics = Dynamics(
        drift_x=tuple(dyn.drift_x),
        drift_theta=dyn.drift_theta,
        disturbance=_disturbance(dyn.disturbance, dyn.bound, doc.seed),
        bound=dyn.bound,
        bound_reading=dyn.bound_reading,
    )
    controller = ControllerConfig(**doc.controller.model_dump())
    integrator = IntegratorConfig(dt=doc.integrator.dt, t_end=doc.integrator.t_end)
    subtasks = tuple(
        Subtask(tuple(s.invariant), tuple(s.reach), s.deadline, s.name or f"subtask_{i + 1}")
        for i, s in enumerate(doc.subtask)
    )
    initial = (
        UnicycleState(np.asarray(doc.initial.x), doc.initial.theta)
        if doc.initial is not None
        else UnicycleState(box.center[:2] if box.dim >= 2 else np.zeros(2), 0.0)
    )
    return Scenario(
        name=doc.name,
        gaussian=gaussian,
        predicates=predicates,
        formula=formula,
        formula_text=doc.formula.text,
        subtasks=subtasks,
        dynamics=dynamics,
        controller=controller,
        integrator=integrator,
        box=box,
        initial=initial,
        seed=doc.seed,
        chi_overrides={s.id: s.chi for s in doc.predicate if s.chi is not None},
        references={s.id: s.reference_c for s in doc.predicate if s.reference_c is not None},
        alternate_gaussian=alternate,
        alternate_label="std_reading" if doc.gaussian.covariance_reading == "variance" else "variance_reading",
    )


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Parse, validate and build a scenario; every failure becomes a ScenarioError."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}", file=str(path)) from e
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError(f"{path}: invalid TOML: {e}", file=str(path), line=getattr(e, "lineno", None)) from e

    try:
        doc = ScenarioFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "<root>"
        line = _line_of(text, first["loc"])
        where = f" (line {line})" if line else ""
        logger.error(f"Scenario {path} failed validation at {location}{where}: {first['msg']}")
        raise ScenarioError(
            f"{path}: {location}{where}: {first['msg']}",
            file=str(path),
            location=location,
            line=line,
            errors=len(e.errors()),
        ) from e

    try:
        scenario = build_scenario(doc)
    except ScenarioError:
        raise
    except RistlError as e:
        raise ScenarioError(f"{path}: {e.message}", help=e.detail.get("help"), file=str(path), cause=e.code) from e
    logger.info(f"Loaded scenario {scenario.name!r} from {path}: {len(scenario.predicates)} predicates, {len(scenario.subtasks)} subtasks")
    return scenario
