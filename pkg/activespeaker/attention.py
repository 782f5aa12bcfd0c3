"""
Cross-modal and self attention over frame-aligned embedding sequences.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import functional as F
from .exceptions import InvalidArgumentError
from .nn import LayerNorm, Linear, Module
from .tensor import Tensor, as_tensor

logger = logging.getLogger(__name__)


def scaled_dot_attention(Q, K, V, d: int) -> Tuple[Tensor, Tensor]:
    """
    softmax(Q K^T / sqrt(d)) V.

    Args:
        Q: Queries of shape (..., T_q, d)
        K: Keys of shape (..., T_k, d)
        V: Values of shape (..., T_k, d_v)
        d: Dimension used for the scaling

    Returns:
        (output of shape (..., T_q, d_v), weights of shape (..., T_q, T_k))

    Raises:
        InvalidArgumentError: If d is 0 or the operands disagree on T or d
    """
    Q, K, V = as_tensor(Q), as_tensor(K), as_tensor(V)
    if d <= 0:
        raise InvalidArgumentError(f"Attention dimension d must be positive, got {d}")
    if Q.ndim < 2 or Q.shape[-1] != K.shape[-1] or K.shape[-2] != V.shape[-2]:
        raise InvalidArgumentError(f"Incompatible attention operands Q{Q.shape} K{K.shape} V{V.shape}")
    return F.scaled_dot_product(Q, K, V, d)


class MultiHeadAttention(Module):
    """
    Multi-head attention with separate query and key/value sources.

    The weights of the most recent call are kept in `last_weights`
    (shape (N, heads, T_q, T_k)) for inspection.
    """

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator):
        super().__init__()
        if n_heads < 1 or d_model % n_heads:
            raise InvalidArgumentError(f"d_model {d_model} not divisible by {n_heads} heads")
        self.d_model = d_model
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.q_proj = Linear(d_model, d_model, rng)
        self.k_proj = Linear(d_model, d_model, rng)
        self.v_proj = Linear(d_model, d_model, rng)
        self.out_proj = Linear(d_model, d_model, rng)
        self.last_weights: Optional[np.ndarray] = None

    def _split(self, x: Tensor) -> Tensor:
        n, t, _ = x.shape
        return x.reshape(n, t, self.n_heads, self.head_dim).transpose(0, 2, 1, 3)

    def forward(self, query, source):
        """
        Args:
            query: Target sequence (N, T_q, d_model) producing the queries
            source: Source sequence (N, T_k, d_model) producing keys and values
        """
        n, t_q, _ = query.shape
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(source))
        v = self._split(self.v_proj(source))
        out, weights = scaled_dot_attention(q, k, v, self.head_dim)
        self.last_weights = weights.data.copy()
        out = out.transpose(0, 2, 1, 3).reshape(n, t_q, self.d_model)
        return self.out_proj(out)


class TransformerLayer(Module):
    """
    One post-norm transformer layer.

    forward(src, tar) attends from tar (queries) to src (keys, values) and
    keeps the residual on src: LN(src + attn) followed by LN(h + FFN(h)).
    With tar omitted the layer is ordinary self-attention.
    """

    def __init__(self, d_model: int, n_heads: int, ffn_multiplier: int, rng: np.random.Generator):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads, rng)
        self.norm1 = LayerNorm(d_model)
        self.ff1 = Linear(d_model, ffn_multiplier * d_model, rng)
        self.ff2 = Linear(ffn_multiplier * d_model, d_model, rng)
        self.norm2 = LayerNorm(d_model)

    def forward(self, src, tar=None):
        tar = src if tar is None else tar
        h = self.norm1(src + self.attn(tar, src))
        return self.norm2(h + self.ff2(F.relu(self.ff1(h))))


@dataclass
class CrossAttendedPair:
    a_to_v: Tensor
    v_to_a: Tensor


def _batched(x) -> Tuple[Tensor, bool]:
    x = as_tensor(x)
    if x.ndim == 2:
        return x.reshape((1,) + x.shape), True
    if x.ndim != 3:
        raise InvalidArgumentError(f"Expected a (T, D) or (N, T, D) sequence, got {x.shape}")
    return x, False


class CrossAttention(Module):
    """
    Audio-visual cross-attention.

    a_to_v takes queries from F_v and keys/values from F_a; v_to_a is the
    reverse. Each direction is a full transformer layer.
    """

    def __init__(self, d_model: int, n_heads: int, ffn_multiplier: int, rng: np.random.Generator):
        super().__init__()
        self.a_to_v = TransformerLayer(d_model, n_heads, ffn_multiplier, rng)
        self.v_to_a = TransformerLayer(d_model, n_heads, ffn_multiplier, rng)

    def forward(self, F_a, F_v) -> CrossAttendedPair:
        a, unbatched = _batched(F_a)
        v, _ = _batched(F_v)
        if a.shape[:2] != v.shape[:2]:
            raise InvalidArgumentError(
                f"Audio and visual sequences must be frame-aligned, got lengths {a.shape[1]} and {v.shape[1]}"
            )
        a_to_v = self.a_to_v(a, v)
        v_to_a = self.v_to_a(v, a)
        if unbatched:
            a_to_v, v_to_a = a_to_v.reshape(a_to_v.shape[1:]), v_to_a.reshape(v_to_a.shape[1:])
        return CrossAttendedPair(a_to_v, v_to_a)


def fuse(pair: CrossAttendedPair) -> Tensor:
    """Concatenate the two attended streams on the feature axis: audio-attended first."""
    if pair.a_to_v.shape[:-1] != pair.v_to_a.shape[:-1]:
        raise InvalidArgumentError(f"Cannot fuse streams of shapes {pair.a_to_v.shape} and {pair.v_to_a.shape}")
    return F.concat([pair.a_to_v, pair.v_to_a], axis=-1)


class SelfAttention(Module):
    """One transformer layer over the joint audio-visual sequence."""

    def __init__(self, d_model: int, n_heads: int, ffn_multiplier: int, rng: np.random.Generator):
        super().__init__()
        self.layer = TransformerLayer(d_model, n_heads, ffn_multiplier, rng)

    def forward(self, F_av) -> Tensor:
        x, unbatched = _batched(F_av)
        out = self.layer(x)
        return out.reshape(out.shape[1:]) if unbatched else out
