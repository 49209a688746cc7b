"""Exception hierarchy shared by the simulation and analysis modules."""

from __future__ import annotations


class CPIError(Exception):
    """Base class for all package errors."""


class ConfigError(CPIError, ValueError):
    """Invalid configuration or parameter value.

    ``field`` names the offending configuration key when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class SamplingError(CPIError, ValueError):
    """Grid sampling too coarse for the requested propagation (aliasing risk)."""


class CoverageError(CPIError, ValueError):
    """Refocusing samples fall outside the detector grid too often."""


class QuadratureError(CPIError, ArithmeticError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message: str, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class IOFormatError(CPIError, OSError):
    """Unreadable or malformed input/output file."""
