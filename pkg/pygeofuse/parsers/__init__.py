# pygeofuse/parsers/__init__.py

from .synth_gen_parser import SynthGenParser
from .train_parser import TrainParser
from .evaluate_parser import EvalParser
from .gradcheck_parser import GradCheckParser
from .ablation_parser import AblationParser

__all__ = [
    "SynthGenParser",
    "TrainParser",
    "EvalParser",
    "GradCheckParser",
    "AblationParser",
]
