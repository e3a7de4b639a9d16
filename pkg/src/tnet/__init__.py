"""Terrace convolutional decoder network: a numpy training engine for semantic segmentation."""
from .errors import ConfigError, DataError, NumericError, ShapeError, StateError, TNetError
from .model import TerraceConfig, TNet, build

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "NumericError", "ShapeError", "StateError", "TNetError",
    "TerraceConfig", "TNet", "build",
]
