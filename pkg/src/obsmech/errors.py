"""Exception types raised across the package."""


class ObsMechError(Exception):
    """Base class for package errors."""


class ResourceError(ObsMechError):
    """Requested problem size exceeds the configured dense budget."""


class UnsupportedError(ObsMechError, ValueError):
    """Request outside the supported family (odd chains, non-adjacent sites, ...)."""


class NotApplicableError(ObsMechError):
    """A closed-form result was requested outside its domain of validity."""


class ContractError(ObsMechError, ValueError):
    """An input violates a documented precondition."""


class ConsistencyError(ObsMechError):
    """An internal numerical check failed (trace loss, incomplete projectors)."""


class UndefinedWeakValueError(ObsMechError, ZeroDivisionError):
    """The postselection probability is indistinguishable from zero."""


class InfeasibleTargetsError(ObsMechError, ValueError):
    """Moment targets lie outside the convex hull of the per-outcome features."""


class ConvergenceError(ObsMechError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class FitError(ObsMechError):
    """A least-squares or parameter fit could not be performed."""


class ConfigError(ObsMechError, ValueError):
    """A run configuration could not be parsed or validated."""
