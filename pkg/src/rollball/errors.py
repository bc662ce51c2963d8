"""Exception hierarchy shared by all modules."""

__all__ = ["RollballError", "InvalidProfileError", "DomainError", "ChartDomainError", "FamilyDomainError", "DegenerateBranchError", "PreconditionError", "ConfigurationError", "EvaluationError", "IntegrationError", "ConsistencyError", "NumericalInconsistencyError", "NearSingularConstraintError"]


class RollballError(Exception):
    """Base class for every error raised by this package."""


class InvalidProfileError(RollballError, ValueError):
    """A profile was built from non-finite or inconsistent data."""


class DomainError(RollballError, ValueError):
    """An argument lies outside the domain of the evaluated function."""


class ChartDomainError(DomainError):
    """A state lies outside the chart it is expressed in (e.g. r <= 0 in polar form)."""


class FamilyDomainError(DomainError):
    """A point does not satisfy the defining conditions of an equilibrium family."""


class DegenerateBranchError(DomainError):
    """Delta_11 vanishes, so the critical-rotation function is undefined."""


class PreconditionError(RollballError, ValueError):
    """An operation was asked for something it explicitly does not cover."""


class ConfigurationError(RollballError, ValueError):
    """Mismatched or malformed configuration (parameters, profiles, files)."""


class EvaluationError(RollballError, FloatingPointError):
    """A vector field or integral produced a non-finite value."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class IntegrationError(RollballError, RuntimeError):
    """The adaptive integrator could not continue; carries the last good state."""

    def __init__(self, message, t_last=None, state_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.state_last = state_last


class ConsistencyError(RollballError, ArithmeticError):
    """An internal identity that should hold by construction was violated."""


class NumericalInconsistencyError(ConsistencyError):
    """A scan found more structure than the theory permits (e.g. > 2 zeros per branch)."""


class NearSingularConstraintError(RollballError, ArithmeticError):
    """The constraint Gram matrix S A^-1 S^T is too ill-conditioned to invert."""
