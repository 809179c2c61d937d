"""Exception types shared across the toolkit."""


class QBattError(Exception):
    """Base class for all toolkit-specific errors."""


class CapacityError(QBattError):
    """Requested problem size exceeds a configured resource cap."""


class ContractViolationError(QBattError):
    """An input violates a documented precondition (e.g. non-hermitian)."""


class InvariantViolationError(QBattError):
    """A physical invariant failed; signals an integrator or construction bug."""


class DegenerateInputError(QBattError):
    """Input is degenerate for the requested quantity (zero denominator etc.)."""


class IntegrationError(QBattError):
    """The ODE controller could not meet its tolerance, or drifted."""


class FitFailureError(QBattError):
    """Nonlinear fit did not converge within the iteration budget."""

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class InsufficientDataError(QBattError):
    """Signal too short or featureless for the requested estimate."""


class ResolutionError(QBattError):
    """Time grid too coarse to resolve the fastest frequency present."""


class SingularityError(QBattError):
    """Parameter point sits on a singularity of the requested formula."""


class SchemaError(QBattError):
    """A configuration or data file does not match its published schema."""
