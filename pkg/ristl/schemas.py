"""
Scenario file schemas

Pydantic models for the TOML scenario format. Unknown keys are rejected in
every section.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GaussianSection(_Section):
    """Environment vector X ~ N(mean, covariance)."""
    mean: List[float] = Field(..., min_length=1)
    covariance: Optional[List[List[float]]] = None
    diagonal: Optional[List[float]] = None
    covariance_reading: Literal["variance", "std"] = "variance"
    compare_readings: bool = Field(False, description="Also synthesize thresholds under the other diagonal reading")

    @model_validator(mode="after")
    def _one_covariance(self) -> "GaussianSection":
        if (self.covariance is None) == (self.diagonal is None):
            raise ValueError("give exactly one of covariance or diagonal")
        n = len(self.mean)
        if self.diagonal is not None and len(self.diagonal) != n:
            raise ValueError(f"diagonal has {len(self.diagonal)} entries, mean has {n}")
        if self.covariance is not None and (len(self.covariance) != n or any(len(row) != n for row in self.covariance)):
            raise ValueError(f"covariance must be {n}x{n}")
        return self


class PredicateSection(_Section):
    id: str = Field(..., pattern=r"^[A-Za-z_][A-Za-z0-9_]*$")
    family: Literal["affine", "norm_ball"]
    v: Optional[List[float]] = None
    w: Optional[List[float]] = None
    b0: float = 0.0
    selector: Optional[List[int]] = None
    epsilon: Optional[float] = None
    risk: Literal["chance", "ev", "var", "cvar"]
    delta: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    chi: Optional[float] = Field(None, gt=0.0)
    reference_c: Optional[float] = None

    @field_validator("delta", "beta")
    @classmethod
    def _probability(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not (0.0 < value < 1.0):
            raise ValueError("must lie strictly between 0 and 1")
        return value

    @model_validator(mode="after")
    def _family_shape(self) -> "PredicateSection":
        if self.family == "affine":
            if self.v is None or self.w is None:
                raise ValueError("affine predicates need v and w")
        else:
            if self.selector is None or len(self.selector) != 2 or self.epsilon is None:
                raise ValueError("norm_ball predicates need a two-entry selector and epsilon")
            if self.epsilon <= 0.0:
                raise ValueError("epsilon must be positive")
        if self.risk == "chance":
            if self.delta is None:
                raise ValueError("chance predicates need delta")
        else:
            if self.gamma is None:
                raise ValueError(f"{self.risk} predicates need gamma")
            if self.risk in ("var", "cvar") and self.beta is None:
                raise ValueError(f"{self.risk} predicates need beta")
        return self


class FormulaSection(_Section):
    text: str


class SubtaskSection(_Section):
    name: Optional[str] = None
    invariant: List[str] = Field(default_factory=list)
    reach: List[str] = Field(default_factory=list)
    deadline: float = Field(..., gt=0.0)


class DisturbanceSection(_Section):
    kind: Literal["zero", "constant", "saturated_spring", "bounded_noise"] = "zero"
    vector: Optional[List[float]] = None
    gain: float = 0.5
    seed: Optional[int] = None


class DynamicsSection(_Section):
    drift_x: List[float] = Field(default_factory=lambda: [0.0, 0.0], min_length=2, max_length=2)
    drift_theta: float = 0.0
    disturbance: DisturbanceSection = Field(default_factory=DisturbanceSection)
    bound: float = Field(0.0, ge=0.0)
    bound_reading: Literal["norm", "component"] = "norm"


class ControllerSection(_Section):
    law: Literal["slack", "min_norm"] = "slack"
    l: Optional[float] = Field(None, gt=0.0)
    eta: float = Field(20.0, gt=0.0)
    alpha: Optional[float] = Field(None, gt=0.0)
    barrier_gain: float = Field(1.0, gt=0.0)
    safety_chi: float = 0.05
    offset_shape: Literal["linear", "exponential"] = "linear"
    offset_decay: Optional[float] = Field(None, gt=0.0)
    reach_margin: float = Field(0.0, ge=0.0, description="Room left inside each reach set at its deadline")


class IntegratorSection(_Section):
    dt: float = Field(0.01, gt=0.0)
    t_end: Optional[float] = Field(None, gt=0.0)


class DomainSection(_Section):
    lower: List[float] = Field(..., min_length=1)
    upper: List[float] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _ordered(self) -> "DomainSection":
        if len(self.lower) != len(self.upper):
            raise ValueError("lower and upper must have the same length")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise ValueError("need lower < upper in every coordinate")
        return self


class InitialSection(_Section):
    x: List[float] = Field(..., min_length=2, max_length=2)
    theta: float = 0.0


class ScenarioFile(_Section):
    name: str = "scenario"
    seed: int = 0
    gaussian: GaussianSection
    predicate: List[PredicateSection] = Field(..., min_length=1)
    formula: FormulaSection
    subtask: List[SubtaskSection] = Field(default_factory=list)
    dynamics: DynamicsSection = Field(default_factory=DynamicsSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    integrator: IntegratorSection = Field(default_factory=IntegratorSection)
    domain: DomainSection
    initial: Optional[InitialSection] = None

    @model_validator(mode="after")
    def _cross_checks(self) -> "ScenarioFile":
        ids = [p.id for p in self.predicate]
        if len(set(ids)) != len(ids):
            raise ValueError("predicate ids must be unique")
        known = set(ids)
        deadlines = [s.deadline for s in self.subtask]
        if any(b <= a for a, b in zip(deadlines, deadlines[1:])):
            raise ValueError("subtask deadlines must be strictly increasing")
        for i, s in enumerate(self.subtask):
            unknown = [pid for pid in s.invariant + s.reach if pid not in known]
            if unknown:
                raise ValueError(f"subtask {i + 1} names unknown predicates {unknown}")
        if self.integrator.t_end is not None and deadlines and deadlines[-1] > self.integrator.t_end + 1e-9:
            raise ValueError("last subtask deadline exceeds integrator.t_end")
        if self.subtask and self.initial is None:
            raise ValueError("scenarios with subtasks need an [initial] section")
        return self
