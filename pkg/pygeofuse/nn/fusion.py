# pygeofuse/nn/fusion.py

"""
Satellite-roadmap fusion.

Token level: the roadmap tokens are keys/values of a cross-attention that
updates the satellite tokens, followed by a self-attention refinement.
Channel level: both token matrices are transposed so that feature channels
form the sequence, and the roadmap channels guide a second cross-attention.
Each stage adds its attention term through a learnable scalar gate.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DimensionError
from .attention import AttnBlockParams, MhaConfig, attn_block
from .layers import Module
from .tensor import Parameter, Tensor, l2_normalize, tensor_mean


@dataclass(frozen=True)
class FusionConfig:
    num_tokens: int
    d_model: int
    heads: int = 4
    channel_heads: Optional[int] = None
    d_ff: Optional[int] = None
    gate_init: float = 0.1
    post_norm: bool = True
    channel_fusion: bool = True

    @property
    def token_block(self) -> MhaConfig:
        return MhaConfig(d_model=self.d_model, heads=self.heads, d_ff=self.d_ff, post_norm=self.post_norm)

    @property
    def channel_block(self) -> MhaConfig:
        heads = self.channel_heads
        if heads is None:
            heads = default_channel_heads(self.num_tokens, self.heads)
        return MhaConfig(d_model=self.num_tokens, heads=heads, post_norm=self.post_norm)


def default_channel_heads(num_tokens: int, heads: int) -> int:
    """Largest divisor of the token count that is at most `heads`."""
    return max(h for h in range(1, max(heads, 1) + 1) if num_tokens % h == 0)


class FusionParams(Module):
    """Gates w1, w2, w3 and the token-cross, token-self and channel-cross blocks."""

    def __init__(self, config: FusionConfig, rng: np.random.Generator):
        self.gate_w1 = Parameter("gate_w1", config.gate_init)
        self.gate_w2 = Parameter("gate_w2", config.gate_init)
        self.gate_w3 = Parameter("gate_w3", config.gate_init if config.channel_fusion else 0.0)
        self.token_cross = AttnBlockParams(config.token_block, rng)
        self.token_self = AttnBlockParams(config.token_block, rng)
        self.channel_cross = AttnBlockParams(config.channel_block, rng)
        self._config = config
        if not config.channel_fusion:
            self.gate_w3.freeze(0.0)

    @property
    def config(self) -> FusionConfig:
        return self._config


def _check_pair(f_s: Tensor, f_r: Tensor, config: FusionConfig) -> None:
    expected = (config.num_tokens, config.d_model)
    if f_s.shape != expected or f_r.shape != expected:
        raise DimensionError(
            f"fusion expects satellite and roadmap tokens of shape {expected}, got {f_s.shape} and {f_r.shape}"
        )


def token_cross_fuse(f_s: Tensor, f_r: Tensor, params: FusionParams) -> Tensor:
    """F'_s = F_s + w1 * block(F_s, F_r)."""
    _check_pair(f_s, f_r, params.config)
    return f_s + params.gate_w1 * attn_block(f_s, f_r, params.token_cross, params.config.token_block)


def token_self_refine(f_s1: Tensor, params: FusionParams) -> Tensor:
    """F''_s = F'_s + w2 * block(F'_s, F'_s)."""
    if f_s1.ndim != 2 or f_s1.shape[1] != params.config.d_model:
        raise DimensionError(f"token_self_refine expects (N, {params.config.d_model}), got {f_s1.shape}")
    return f_s1 + params.gate_w2 * attn_block(f_s1, f_s1, params.token_self, params.config.token_block)


def channel_cross_fuse(f_s2: Tensor, f_r: Tensor, params: FusionParams) -> Tensor:
    """F_rs = F''_s^T + w3 * block(F''_s^T, F_r^T), shape (D, N)."""
    _check_pair(f_s2, f_r, params.config)
    s_t, r_t = f_s2.T, f_r.T
    return s_t + params.gate_w3 * attn_block(s_t, r_t, params.channel_cross, params.config.channel_block)


def pool_fused(f_rs: Tensor) -> Tensor:
    """Global average pooling over the token axis of a (D, N) matrix."""
    if f_rs.ndim != 2:
        raise DimensionError(f"pool_fused expects a (D, N) matrix, got {f_rs.shape}")
    return tensor_mean(f_rs, axis=1)


def fuse_tokens(f_s: Tensor, f_r: Tensor, params: FusionParams) -> Tensor:
    """Un-normalized pooled fused feature f_rs of length D."""
    refined = token_self_refine(token_cross_fuse(f_s, f_r, params), params)
    if params.config.channel_fusion:
        return pool_fused(channel_cross_fuse(refined, f_r, params))
    return pool_fused(refined.T)


def fuse_pair(f_s: Tensor, f_r: Tensor, params: FusionParams) -> Tensor:
    """Fused satellite-roadmap feature, L2-normalized, length D."""
    return l2_normalize(fuse_tokens(f_s, f_r, params))
