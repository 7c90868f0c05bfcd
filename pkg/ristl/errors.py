"""
Error types

Every failure raised by the toolkit is a RistlError carrying a structured
detail dict with an error code, a human readable message and a hint.
"""

from typing import Any, Dict, Optional


class RistlError(Exception):
    """Base class for toolkit errors."""

    code: str = "ristl_error"
    default_help: str = "See the scenario documentation for valid settings."

    def __init__(self, message: str, help: Optional[str] = None, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.detail: Dict[str, Any] = {
            "error": self.code,
            "message": message,
            "help": help or self.default_help,
        }
        for key, value in context.items():
            if value is not None:
                self.detail[key] = value

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.detail)


class FormulaSyntaxError(RistlError):
    code = "formula_syntax"
    default_help = "Operators are &, |, !, U[a,b], F[a,b], G[a,b] and true."

    def __init__(self, message: str, position: int, **context: Any) -> None:
        super().__init__(f"{message} at position {position}", position=position, **context)
        self.position = position


class UnknownPredicateError(RistlError):
    code = "unknown_predicate"
    default_help = "Declare every predicate id used in the formula as a [[predicate]] entry."


class DistributionError(RistlError):
    code = "distribution"
    default_help = "Probabilities must lie strictly in (0, 1) and covariances must be PSD."


class EmptySetError(RistlError):
    code = "empty_set"
    default_help = "Lower the threshold or enlarge the domain box."


class InfeasibleThresholdError(RistlError):
    code = "infeasible_threshold"
    default_help = "The risk requirement cannot be met anywhere in the domain box."


class AssumptionError(RistlError):
    code = "assumption_failed"
    default_help = "Relax the risk requirements or reduce the margins chi."


class BarrierError(RistlError):
    code = "barrier"
    default_help = "Check that the start point satisfies the invariance predicates."


class ControllerInfeasibleError(RistlError):
    code = "controller_infeasible"
    default_help = "Increase alpha or reduce the disturbance bound C."


class HorizonError(RistlError):
    code = "horizon"
    default_help = "Provide a trace that covers the formula horizon."


class DivergenceError(RistlError):
    code = "divergence"
    default_help = "Reduce dt or the disturbance bound."


class SwitchContainmentError(RistlError):
    code = "switch_containment"
    default_help = "Consecutive subtasks must share a feasible region at the switch time."


class ScenarioError(RistlError):
    code = "scenario"
    default_help = "Fix the scenario file; unknown keys are rejected."


class GradientError(RistlError):
    code = "gradient_undefined"
    default_help = "The gradient of a norm predicate is undefined at its center; perturb the point."


class DeterminizationError(RistlError):
    code = "determinization"
    default_help = "Determinize the RiSTL formula once, after thresholds have been synthesized."


class TraceError(RistlError):
    code = "trace"
    default_help = "Traces need a header row and strictly increasing times."
