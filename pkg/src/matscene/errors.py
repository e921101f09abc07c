"""Exception types shared across the pipeline."""


class MatsceneError(Exception):
    """Base class for all pipeline errors."""


class DecodeError(MatsceneError):
    """Raised when an input image cannot be decoded as 8/16-bit RGB."""


class ParameterError(MatsceneError, ValueError):
    """Raised when an operation receives out-of-contract arguments."""


class TooSmallError(ParameterError):
    """Raised when an image is smaller than one grid cell."""


class ConfigurationError(MatsceneError):
    """Raised for invalid run configuration (missing pools, bad paths, ...)."""
