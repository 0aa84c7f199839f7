"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CzReachError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(CzReachError):
    """Operands have inconsistent dimensions."""


class DomainError(CzReachError):
    """An operation was evaluated outside its mathematical domain.

    ``factor`` identifies the offending node when the error surfaced while
    sweeping a factor graph; it is ``None`` for plain scalar operations.
    """

    def __init__(self, message: str, factor: int | None = None):
        super().__init__(message)
        self.factor = factor


class DivisionByZeroInterval(DomainError):
    """Interval division by an interval containing zero."""


class EmptySetError(CzReachError):
    """A set that must be non-empty turned out to be empty."""


class NumericalFailure(CzReachError):
    """A numerical procedure broke down (pivot breakdown, non-convergence)."""


class ExpressionSyntaxError(CzReachError):
    """Malformed dynamics expression; carries the offending position."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class UnknownIdentifier(ExpressionSyntaxError):
    """Expression references a name that is neither a variable nor a function."""


class NonIntegerExponent(ExpressionSyntaxError):
    """Power expressions must have constant integer exponents."""


class ConfigError(CzReachError):
    """Run configuration is structurally invalid."""


class SamplingStarved(CzReachError):
    """Rejection sampling failed to produce points; the constraint band is too
    thin even for the null-space fallback."""
