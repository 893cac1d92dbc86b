"""Shared exception types."""

from .tensor import ConfigurationError, DimensionError, GradCheckError

__all__ = [
    "ConfigurationError",
    "DimensionError",
    "GradCheckError",
    "InputError",
    "VerificationError",
]


class InputError(ValueError):
    """User-supplied data violates a precondition."""


class VerificationError(RuntimeError):
    """An internal consistency check failed."""
