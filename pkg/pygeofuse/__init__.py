# pygeofuse/__init__.py

from .commands import (
    synth_gen,
    train,
    evaluate,
    gradcheck,
    ablation,
)
from .errors import (
    GeoFuseError,
    ConfigurationError,
    DataError,
    DimensionError,
    ContractError,
    NumericalError,
    GeoFuseWarning,
)

__version__ = "0.1.0"

__all__ = [
    "synth_gen",
    "train",
    "evaluate",
    "gradcheck",
    "ablation",
    "GeoFuseError",
    "ConfigurationError",
    "DataError",
    "DimensionError",
    "ContractError",
    "NumericalError",
    "GeoFuseWarning",
]
