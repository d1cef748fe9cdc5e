# pygeofuse/config/__init__.py

from .base import BaseConfig, parse_overrides
from .synth_gen_config import SynthGenConfig
from .train_config import TrainConfig, ABLATIONS
from .evaluate_config import EvalConfig
from .gradcheck_config import GradCheckConfig
from .ablation_config import AblationConfig

__all__ = [
    "BaseConfig",
    "parse_overrides",
    "SynthGenConfig",
    "TrainConfig",
    "ABLATIONS",
    "EvalConfig",
    "GradCheckConfig",
    "AblationConfig",
]
