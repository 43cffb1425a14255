"""Exception types shared across the package."""


class StefanLabError(Exception):
    """Base class for all package errors."""


class DomainError(StefanLabError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class PreconditionError(StefanLabError, ValueError):
    """The inputs violate a documented precondition (regime, ordering, ...)."""


class NumericalError(StefanLabError, RuntimeError):
    """A numerical procedure failed: instability, non-convergence, breakdown.

    ``diagnostics`` carries whatever state helps to reproduce the failure.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class ConfigError(StefanLabError, ValueError):
    """A configuration document is malformed; ``key`` names the culprit."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
