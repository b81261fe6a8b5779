"""Exception types shared across the package."""


class EFKError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(EFKError, ValueError):
    pass


class SolverFailure(EFKError, RuntimeError):
    """Raised when an optimizer exhausts its budget; carries the last iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class DomainTooShortError(EFKError):
    """The truncated domain does not resolve the exponential tails."""


class UnclassifiableError(EFKError):
    """A planar profile passes too close to the origin to have a winding label."""


class SeparationNotFound(EFKError):
    pass


class FormatError(EFKError, ValueError):
    """Malformed artifact file."""
