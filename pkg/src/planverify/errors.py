"""Exception hierarchy shared by every subsystem."""

from __future__ import annotations


class PlanVerifyError(Exception):
    """Base class for all domain errors raised by this package."""


# -- scenario / file loading ------------------------------------------------


class LoadError(PlanVerifyError):
    def __init__(self, message: str, path: str = "$") -> None:
        super().__init__(f"{path}: {message}")
        self.path = path
        self.reason = message


class ParseError(LoadError):
    """The file is not valid UTF-8 JSON."""


class SchemaError(LoadError):
    """A required field is missing, has the wrong type, or an unknown field is present."""


class InvariantError(LoadError):
    """The document parsed but violates a domain invariant."""


# -- simulation ---------------------------------------------------------------


class DomainError(PlanVerifyError, ValueError):
    """Numeric precondition violated (probabilities, ranges, coefficients)."""


class OpponentFault(PlanVerifyError):
    """The opponent policy failed (timeout, protocol violation); the rollout is aborted."""


class AdapterTimeout(OpponentFault):
    pass


class ProtocolError(OpponentFault):
    pass


class AdapterSchemaError(OpponentFault):
    pass


# -- planning -----------------------------------------------------------------


class Unreachable(PlanVerifyError):
    """No lattice path connects the start region and the target."""


class NoFeasibleRoute(PlanVerifyError):
    pass


class IrreparableViolation(PlanVerifyError):
    pass


class NoValidCandidate(PlanVerifyError):
    pass


# -- metrics / data -------------------------------------------------------------


class EmptyInput(PlanVerifyError, ValueError):
    pass


class MissingPlannedTrajectory(PlanVerifyError):
    pass


class InsufficientLength(PlanVerifyError):
    pass


class UnannotatedToken(PlanVerifyError):
    pass


class LengthMismatch(PlanVerifyError, ValueError):
    pass


class NonPositiveProbability(PlanVerifyError, ValueError):
    pass


class ShapeMismatch(PlanVerifyError, ValueError):
    pass
