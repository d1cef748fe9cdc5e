# pygeofuse/nn/encoder.py

"""
Small patch-token image encoder and the weather-caption encoder.

One ImageEncoder instance serves the drone, satellite and roadmap views.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..bench.weather import WeatherCondition
from ..errors import ConfigurationError, DataError
from .attention import AttnBlockParams, MhaConfig, attn_block
from .layers import Linear, Module
from .tensor import Parameter, Tensor, index, l2_normalize, tensor_mean

CAPTION_TEMPLATES = (
    "a drone photo of a campus building taken in {weather}",
    "an aerial view captured under {weather}",
    "drone footage of the location in {weather}",
)

CONDITION_PHRASES = {
    WeatherCondition.NORMAL: "clear weather",
    WeatherCondition.FOG: "fog",
    WeatherCondition.RAIN: "rain",
    WeatherCondition.SNOW: "snow",
    WeatherCondition.FOG_RAIN: "fog and rain",
    WeatherCondition.FOG_SNOW: "fog and snow",
    WeatherCondition.RAIN_SNOW: "rain and snow",
    WeatherCondition.DARK: "darkness at night",
    WeatherCondition.OVER_EXPOSED: "over-exposed sunlight",
    WeatherCondition.WIND: "strong wind",
}


@dataclass(frozen=True)
class EncoderConfig:
    image_size: int = 96
    patch_size: int = 16
    d_model: int = 64
    depth: int = 2
    heads: int = 4
    d_ff: Optional[int] = None
    post_norm: bool = True
    shared: bool = True

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ConfigurationError(
                f"image_size {self.image_size} is not a multiple of patch_size {self.patch_size}"
            )
        if self.depth < 0:
            raise ConfigurationError(f"depth is {self.depth} but must be >= 0")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_tokens(self) -> int:
        return self.grid ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3

    @property
    def block(self) -> MhaConfig:
        return MhaConfig(d_model=self.d_model, heads=self.heads, d_ff=self.d_ff, post_norm=self.post_norm)


class ImageEncoder(Module):
    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.patch_proj = Linear(config.patch_dim, config.d_model, rng)
        self.pos_embed = Parameter("pos_embed", rng.normal(0.0, 0.02, size=(config.num_tokens, config.d_model)))
        self.blocks = [AttnBlockParams(config.block, rng) for _ in range(config.depth)]
        self._config = config

    @property
    def config(self) -> EncoderConfig:
        return self._config


def patchify(image: np.ndarray, config: EncoderConfig) -> np.ndarray:
    """(H, W, 3) image -> (N, patch_size*patch_size*3) rows in raster order of patches."""
    expected = (config.image_size, config.image_size, 3)
    image = np.asarray(image, dtype=np.float64)
    if image.shape != expected:
        raise DataError(f"image has shape {image.shape}; encoder expects {expected}")
    g, p = config.grid, config.patch_size
    patches = image.reshape(g, p, g, p, 3).transpose(0, 2, 1, 3, 4)
    return np.ascontiguousarray(patches.reshape(g * g, p * p * 3))


def patch_embed(image: np.ndarray, config: EncoderConfig, params: ImageEncoder) -> Tensor:
    """Flattened non-overlapping patches projected to D, plus positional embeddings."""
    return params.patch_proj(Tensor(patchify(image, config))) + params.pos_embed


def encode_tokens(image: np.ndarray, config: EncoderConfig, params: ImageEncoder) -> Tuple[Tensor, Tensor]:
    """Token matrix (N, D) and its token mean (D,)."""
    tokens = patch_embed(image, config, params)
    for block in params.blocks:
        tokens = attn_block(tokens, tokens, block, config.block)
    return tokens, tensor_mean(tokens, axis=0)


def encode_image(image: np.ndarray, config: EncoderConfig, params: ImageEncoder, head) -> Tuple[Tensor, Tensor]:
    """
    Encode one image.

    Returns
    -------
    tokens : Tensor
        (N, D) encoder output
    feature : Tensor
        L2-normalized bottleneck output of the token mean, (D,)
    """
    tokens, pooled = encode_tokens(image, config, params)
    return tokens, head.embed(pooled)


@dataclass(frozen=True)
class WeatherCaption:
    condition: WeatherCondition
    template_id: int = 0

    def text(self) -> str:
        return CAPTION_TEMPLATES[self.template_id].format(weather=CONDITION_PHRASES[self.condition])


class CaptionEncoder(Module):
    """Embedding table over (condition, template) pairs followed by an affine map."""

    def __init__(self, d_model: int, rng: np.random.Generator, templates: int = len(CAPTION_TEMPLATES)):
        if not 1 <= templates <= len(CAPTION_TEMPLATES):
            raise ConfigurationError(f"templates is {templates} but must be in [1, {len(CAPTION_TEMPLATES)}]")
        self.table = Parameter("table", rng.normal(0.0, 1.0, size=(len(WeatherCondition) * templates, d_model)))
        self.proj = Linear(d_model, d_model, rng)
        self._templates = templates

    def row(self, caption: WeatherCaption) -> int:
        if not isinstance(caption.condition, WeatherCondition):
            raise DataError(f"unknown weather condition {caption.condition!r}")
        if not 0 <= caption.template_id < self._templates:
            raise DataError(f"template id {caption.template_id} is outside [0, {self._templates})")
        return caption.condition.index * self._templates + caption.template_id


def encode_caption(caption: WeatherCaption, params: CaptionEncoder) -> Tensor:
    """Unit-norm caption embedding of length D."""
    return encode_captions([caption], params)[0]


def encode_captions(captions, params: CaptionEncoder) -> Tensor:
    """(B, D) unit-norm embeddings of a batch of captions."""
    rows = np.array([params.row(c) for c in captions], dtype=np.int64)
    return l2_normalize(params.proj(index(params.table, rows)))
