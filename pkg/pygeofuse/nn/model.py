# pygeofuse/nn/model.py

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..errors import ConfigurationError
from ..utils import derive_rng
from .encoder import (
    CAPTION_TEMPLATES,
    CaptionEncoder,
    EncoderConfig,
    ImageEncoder,
    encode_captions,
    encode_tokens,
)
from .fusion import FusionConfig, FusionParams, fuse_tokens
from .layers import Module
from .losses import ClassifierHead, ItmHead
from .tensor import Tensor


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int
    image_size: int = 96
    patch_size: int = 16
    d_model: int = 64
    depth: int = 2
    heads: int = 4
    d_ff: Optional[int] = None
    channel_heads: Optional[int] = None
    caption_templates: int = len(CAPTION_TEMPLATES)
    gate_init: float = 0.1
    post_norm: bool = True
    channel_fusion: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.num_classes < 1:
            raise ConfigurationError(f"num_classes is {self.num_classes} but must be >= 1")

    @property
    def encoder(self) -> EncoderConfig:
        return EncoderConfig(
            image_size=self.image_size,
            patch_size=self.patch_size,
            d_model=self.d_model,
            depth=self.depth,
            heads=self.heads,
            d_ff=self.d_ff,
            post_norm=self.post_norm,
        )

    @property
    def fusion(self) -> FusionConfig:
        return FusionConfig(
            num_tokens=self.encoder.num_tokens,
            d_model=self.d_model,
            heads=self.heads,
            channel_heads=self.channel_heads,
            d_ff=self.d_ff,
            gate_init=self.gate_init,
            post_norm=self.post_norm,
            channel_fusion=self.channel_fusion,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"Unknown model settings: {unknown}")
        return cls(**values)


class GeoFuseModel(Module):
    """
    Shared image encoder, satellite-roadmap fusion, weight-shared classifier
    head, weather-caption encoder and image-text matching head.
    """

    def __init__(self, config: ModelConfig):
        rng = derive_rng(config.seed)
        self.encoder = ImageEncoder(config.encoder, rng)
        self.fusion = FusionParams(config.fusion, rng)
        self.head = ClassifierHead(config.d_model, config.num_classes, rng)
        self.captions = CaptionEncoder(config.d_model, rng, config.caption_templates)
        self.itm = ItmHead(config.d_model, rng)
        self._config = config
        self.assign_names()

    @property
    def config(self) -> ModelConfig:
        return self._config

    def encode(self, image: np.ndarray) -> Tuple[Tensor, Tensor]:
        """(N, D) tokens and the (D,) token mean of one image."""
        return encode_tokens(image, self._config.encoder, self.encoder)

    def fuse(self, sat_tokens: Tensor, aux_tokens: Tensor) -> Tensor:
        """Un-normalized pooled fused feature."""
        return fuse_tokens(sat_tokens, aux_tokens, self.fusion)

    def embed(self, pooled: Tensor) -> Tensor:
        return self.head.embed(pooled)

    def image_feature(self, image: np.ndarray) -> Tensor:
        return self.embed(self.encode(image)[1])

    def fused_feature(self, satellite: np.ndarray, auxiliary: np.ndarray) -> Tensor:
        sat_tokens, _ = self.encode(satellite)
        aux_tokens, _ = self.encode(auxiliary)
        return self.embed(self.fuse(sat_tokens, aux_tokens))

    def caption_features(self, captions) -> Tensor:
        return encode_captions(captions, self.captions)
