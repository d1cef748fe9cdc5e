# pygeofuse/commands/__init__.py

from .synth_gen import synth_gen
from .train import train
from .evaluate import evaluate
from .gradcheck import gradcheck
from .ablation import ablation

__all__ = [
    "synth_gen",
    "train",
    "evaluate",
    "gradcheck",
    "ablation"
]
