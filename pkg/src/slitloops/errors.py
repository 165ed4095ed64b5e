"""Exception types raised across the package."""


class SlitLoopsError(Exception):
    """Base class for all package errors."""


class ConfigError(SlitLoopsError, ValueError):
    """Invalid or unparseable experiment configuration.

    ``errors`` holds every problem found, not only the first one.
    """

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]


class GeometryError(ConfigError):
    """Slit layout is inconsistent (overlapping or unordered slits)."""


class DomainError(SlitLoopsError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ConvergenceError(SlitLoopsError, ArithmeticError):
    """Mesh refinement did not reach the requested tolerance.

    The last two iterates are kept so callers can judge how far off they were.
    """

    def __init__(self, message, previous, last):
        super().__init__(message)
        self.previous = previous
        self.last = last


class BudgetError(SlitLoopsError, RuntimeError):
    """The requested evaluation would exceed its node budget."""


class DegenerateNormalizationError(SlitLoopsError, ArithmeticError):
    """A normalizer vanished, so the normalized quantity is meaningless."""
