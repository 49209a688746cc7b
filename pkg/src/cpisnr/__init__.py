"""Signal-to-noise analysis of correlation plenoptic imaging with chaotic light."""

from .errors import ConfigError, CoverageError, CPIError, IOFormatError, QuadratureError, SamplingError
from .optics import GeometryConfig, LensPupil, ObjectMask, RefocusParams, SetupKind, SourceModel, refocus_params

__version__ = "0.1.0"

__all__ = [
    "CPIError",
    "ConfigError",
    "CoverageError",
    "GeometryConfig",
    "IOFormatError",
    "LensPupil",
    "ObjectMask",
    "QuadratureError",
    "RefocusParams",
    "SamplingError",
    "SetupKind",
    "SourceModel",
    "refocus_params",
]
