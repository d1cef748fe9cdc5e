# pygeofuse/nn/__init__.py

from .tensor import Tensor, Parameter, backward, no_grad, gradient_map, zero_grad
from .attention import MhaConfig, AttnBlockParams, mha, attn_block
from .fusion import FusionConfig, FusionParams, fuse_pair, fuse_tokens
from .encoder import EncoderConfig, WeatherCaption, encode_image, encode_caption
from .losses import AnchorSet, ClassifierHead, build_anchor_set, total_loss
from .model import GeoFuseModel, ModelConfig
from .objective import Batch, LossTerms, ObjectiveSettings, batch_losses
from .checkpoint import save_checkpoint, load_checkpoint, load_model
from .gradcheck import GradCheckRow, check_gradients, relative_error, run_gradcheck_suite

__all__ = [
    "Tensor",
    "Parameter",
    "backward",
    "no_grad",
    "gradient_map",
    "zero_grad",
    "MhaConfig",
    "AttnBlockParams",
    "mha",
    "attn_block",
    "FusionConfig",
    "FusionParams",
    "fuse_pair",
    "fuse_tokens",
    "EncoderConfig",
    "WeatherCaption",
    "encode_image",
    "encode_caption",
    "AnchorSet",
    "ClassifierHead",
    "build_anchor_set",
    "total_loss",
    "GeoFuseModel",
    "ModelConfig",
    "Batch",
    "LossTerms",
    "ObjectiveSettings",
    "batch_losses",
    "save_checkpoint",
    "load_checkpoint",
    "load_model",
    "GradCheckRow",
    "check_gradients",
    "relative_error",
    "run_gradcheck_suite",
]
