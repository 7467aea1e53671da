"""Composite layers built from autodiff primitives."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence

import numpy as np

from transpose_kit.autodiff import functional as F
from transpose_kit.autodiff.tensor import (
    Array,
    Tensor,
    add,
    make_result,
    matmul,
    mul,
    permute,
    reshape,
    swap_last,
)
from transpose_kit.errors import DimensionError

TRANSFORMER_ROLES: tuple[str, ...] = (
    "ln1_gamma",
    "ln1_beta",
    "wq",
    "bq",
    "wk",
    "bk",
    "wv",
    "bv",
    "wo",
    "bo",
    "ln2_gamma",
    "ln2_beta",
    "w1",
    "b1",
    "w2",
    "b2",
)


def crop2d(x: Tensor, height: int, width: int) -> Tensor:
    """Keep the top-left `height`×`width` window of the last two axes."""
    if height > x.shape[-2] or width > x.shape[-1]:
        raise DimensionError(f"cannot crop {x.shape} to {height}x{width}")
    full = x.shape

    def backward_fn(g: Array) -> Sequence[Array | None]:
        grad = np.zeros(full, dtype=g.dtype)
        grad[..., :height, :width] = g
        return (grad,)

    return make_result(x.data[..., :height, :width].copy(), (x,), "crop2d", backward_fn)


def _linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return add(matmul(x, weight), bias)


def multi_head_attention(x: Tensor, p: Mapping[str, Tensor], heads: int) -> Tensor:
    """Scaled dot-product self-attention over a `[B, T, D]` token batch."""
    batch, tokens, dim = x.shape
    head_dim = dim // heads

    def split(z: Tensor) -> Tensor:
        return permute(reshape(z, (batch, tokens, heads, head_dim)), (0, 2, 1, 3))

    q = split(_linear(x, p["wq"], p["bq"]))
    k = split(_linear(x, p["wk"], p["bk"]))
    v = split(_linear(x, p["wv"], p["bv"]))
    scores = mul(matmul(q, swap_last(k)), 1.0 / math.sqrt(head_dim))
    context = matmul(F.softmax(scores, axis=-1), v)
    merged = reshape(permute(context, (0, 2, 1, 3)), (batch, tokens, dim))
    return _linear(merged, p["wo"], p["bo"])


def transformer_block(x: Tensor, p: Mapping[str, Tensor], heads: int) -> Tensor:
    """Pre-norm block: x + MHSA(LN(x)), then x + MLP(LN(x)) with a GELU MLP."""
    if x.ndim != 3:
        raise DimensionError(f"transformer block expects [B, T, D], got {x.shape}")
    x = add(x, multi_head_attention(F.layer_norm(x, p["ln1_gamma"], p["ln1_beta"]), p, heads))
    hidden = F.activation(_linear(F.layer_norm(x, p["ln2_gamma"], p["ln2_beta"]), p["w1"], p["b1"]), "gelu")
    return add(x, _linear(hidden, p["w2"], p["b2"]))


__all__ = ["TRANSFORMER_ROLES", "crop2d", "multi_head_attention", "transformer_block"]
