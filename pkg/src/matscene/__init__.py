"""matscene: mine soft region maps, textures and PBR materials from photos,
compose annotated synthetic 2D/3D scenes from them, and score zero-shot
material-segmentation predictions against point-based annotations."""

__version__ = "0.1.0"

from matscene.errors import (
    ConfigurationError,
    DecodeError,
    MatsceneError,
    ParameterError,
    TooSmallError,
)

__all__ = [
    "__version__",
    "MatsceneError",
    "DecodeError",
    "ParameterError",
    "ConfigurationError",
    "TooSmallError",
]
