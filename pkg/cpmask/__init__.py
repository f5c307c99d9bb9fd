"""
Commonality-parsing mask branch for partially supervised instance segmentation
"""
from importlib import metadata

from .enums import NormalizeModes, Splits, Subsets, SupervisionModes
from .exceptions import CPMaskException
from .schema import TrainConfig

try:
    __version__ = metadata.version("cpmask")
except metadata.PackageNotFoundError:
    __version__ = "0.0.0"

__all__ = [
    # Enums
    "NormalizeModes",
    "Splits",
    "Subsets",
    "SupervisionModes",
    # Errors
    "CPMaskException",
    # Config
    "TrainConfig"
]
