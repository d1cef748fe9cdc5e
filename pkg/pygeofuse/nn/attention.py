# pygeofuse/nn/attention.py

"""
Multi-head attention and the Transformer block wrapped around it.

The fusion stages use the whole block (attention, feed-forward and the two
normalizations) as their attention term; their gated residual is applied by
the caller.
"""

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ConfigurationError, DimensionError
from .layers import LayerNorm, Linear, Module
from .tensor import Tensor, concat, gelu, matmul, softmax_last_axis


@dataclass(frozen=True)
class MhaConfig:
    d_model: int
    heads: int = 4
    d_ff: Optional[int] = None
    post_norm: bool = True
    eps: float = 1e-5

    def __post_init__(self):
        if self.d_ff is None:
            object.__setattr__(self, "d_ff", 4 * self.d_model)
        if self.heads < 1:
            raise ConfigurationError(f"heads is {self.heads} but must be >= 1")
        if self.d_model % self.heads != 0:
            raise ConfigurationError(f"d_model {self.d_model} is not divisible by heads {self.heads}")
        if self.d_ff < self.d_model:
            raise ConfigurationError(f"d_ff {self.d_ff} must be >= d_model {self.d_model}")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads


class AttnBlockParams(Module):
    """Projections, feed-forward and normalization Parameters of one attention block."""

    def __init__(self, config: MhaConfig, rng: np.random.Generator):
        d, d_ff = config.d_model, config.d_ff
        self.w_q = Linear(d, d, rng)
        self.w_k = Linear(d, d, rng)
        self.w_v = Linear(d, d, rng)
        self.w_o = Linear(d, d, rng)
        self.ff_in = Linear(d, d_ff, rng)
        self.ff_out = Linear(d_ff, d, rng)
        self.norm_attn = LayerNorm(d, config.eps)
        self.norm_ff = LayerNorm(d, config.eps)
        self._config = config

    @property
    def config(self) -> MhaConfig:
        return self._config

    def __call__(self, q_src: Tensor, kv_src: Tensor) -> Tensor:
        return attn_block(q_src, kv_src, self, self._config)


def _check_width(name: str, x: Tensor, config: MhaConfig) -> None:
    if x.ndim != 2 or x.shape[1] != config.d_model:
        raise DimensionError(f"{name} has shape {x.shape}; expected (L, {config.d_model})")


def mha(
    q_in: Tensor,
    k_in: Tensor,
    v_in: Tensor,
    params: AttnBlockParams,
    config: MhaConfig,
    return_weights: bool = False,
) -> Union[Tensor, Tuple[Tensor, list]]:
    """
    Scaled dot-product attention over `config.heads` heads.

    Parameters
    ----------
    `q_in` : Tensor
        Queries, shape (Lq, D)
    `k_in`, `v_in` : Tensor
        Keys and values, shape (Lk, D)
    `return_weights` : bool, optional
        Also return the list of per-head (Lq, Lk) attention weight matrices.

    Returns
    -------
    Tensor of shape (Lq, D), optionally with the attention weights.
    """
    _check_width("q_in", q_in, config)
    _check_width("k_in", k_in, config)
    _check_width("v_in", v_in, config)
    if k_in.shape[0] != v_in.shape[0]:
        raise DimensionError(f"keys {k_in.shape} and values {v_in.shape} differ in length")

    q = params.w_q(q_in)
    k = params.w_k(k_in)
    v = params.w_v(v_in)
    scale = 1.0 / np.sqrt(config.head_dim)

    heads, weights = [], []
    for h in range(config.heads):
        cols = slice(h * config.head_dim, (h + 1) * config.head_dim)
        q_h, k_h, v_h = q[:, cols], k[:, cols], v[:, cols]
        attn = softmax_last_axis(matmul(q_h, k_h.T) * scale)
        weights.append(attn)
        heads.append(matmul(attn, v_h))

    merged = heads[0] if len(heads) == 1 else concat(heads, axis=1)
    out = params.w_o(merged)
    if return_weights:
        return out, weights
    return out


def _feed_forward(x: Tensor, params: AttnBlockParams) -> Tensor:
    return params.ff_out(gelu(params.ff_in(x)))


def attn_block(q_src: Tensor, kv_src: Tensor, params: AttnBlockParams, config: MhaConfig) -> Tensor:
    """
    Attention followed by feed-forward, each wrapped in add & norm.

    Post-norm (default): x = norm(q + mha(q, kv, kv)); out = norm(x + ff(x)).
    Pre-norm: x = q + mha(norm(q), norm(kv), norm(kv)); out = x + ff(norm(x)).
    The output has the shape of `q_src`.
    """
    if config.post_norm:
        x = params.norm_attn(q_src + mha(q_src, kv_src, kv_src, params, config))
        return params.norm_ff(x + _feed_forward(x, params))

    q_n = params.norm_attn(q_src)
    kv_n = q_n if kv_src is q_src else params.norm_attn(kv_src)
    x = q_src + mha(q_n, kv_n, kv_n, params, config)
    return x + _feed_forward(params.norm_ff(x), params)
