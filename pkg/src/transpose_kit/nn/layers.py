"""
Layer specifications and the per-layer transposition rules.

A `LayerSpec` is an immutable description of one layer: its operation, its
hyperparameters, the activation applied after the operation, and references
into the model's shared parameter store. Transposing a spec swaps the
operation for its inverse and swaps the forward/transposed activations, so
transposing twice gives back an equal spec.
"""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from transpose_kit.errors import UnsupportedLayerError

LayerKind = Literal[
    "linear",
    "conv2d",
    "deconv2d",
    "pool2d",
    "upsample",
    "transformer_block",
    "positional_encoding",
    "flatten",
    "unflatten",
    "to_tokens",
    "from_tokens",
    "token_pool",
    "token_unpool",
]

Shape = tuple[int, ...]

INVERSE_KIND: dict[str, str] = {
    "linear": "linear",
    "conv2d": "deconv2d",
    "deconv2d": "conv2d",
    "pool2d": "upsample",
    "upsample": "pool2d",
    "transformer_block": "transformer_block",
    "positional_encoding": "positional_encoding",
    "flatten": "unflatten",
    "unflatten": "flatten",
    "to_tokens": "from_tokens",
    "from_tokens": "to_tokens",
    "token_pool": "token_unpool",
    "token_unpool": "token_pool",
}

PARAMETRIC_KINDS = frozenset({"linear", "conv2d", "deconv2d"})


class LayerSpec(BaseModel):
    """
    One layer of a sequential model.

    Attributes:
        kind: Operation performed by the layer.
        units: Output features of a linear layer.
        channels: Output channels of a conv2d/deconv2d layer.
        kernel: Square kernel size for convolutions.
        stride: Convolution stride.
        padding: Convolution zero padding.
        size: Pool size or upsampling factor.
        pool: Pool reduction; an upsample layer keeps the kind it inverts.
        heads: Attention heads of a transformer block.
        mlp_dim: Hidden width of a transformer block's MLP.
        bias: Whether the linear/conv layer carries bias vectors.
        share_transposed: Positional encoding reused by the transposed model
            (True) or a separate table for that direction (False).
        activation: Activation k applied after the operation.
        transpose_activation: Activation k' the transposed layer applies.
        transposed: Whether this spec is the transposed view of a layer.
        in_shape: Per-sample input shape, filled in by `build_model`.
        out_shape: Per-sample output shape, filled in by `build_model`.
        params: Role name -> key in the shared parameter store.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: LayerKind
    units: int | None = Field(default=None, ge=1)
    channels: int | None = Field(default=None, ge=1)
    kernel: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    padding: int = Field(default=0, ge=0)
    size: int = Field(default=2, ge=1)
    pool: Literal["max", "avg"] = "avg"
    heads: int = Field(default=1, ge=1)
    mlp_dim: int | None = Field(default=None, ge=1)
    bias: bool = True
    share_transposed: bool = True
    activation: str = "identity"
    transpose_activation: str | None = None
    transposed: bool = False
    in_shape: Shape | None = None
    out_shape: Shape | None = None
    params: dict[str, str] = Field(default_factory=dict)

    @property
    def parametric(self) -> bool:
        return self.kind in PARAMETRIC_KINDS

    def active_roles(self) -> tuple[str, ...]:
        """Parameter roles this layer reads in its current direction."""
        roles = tuple(self.params)
        if self.kind in PARAMETRIC_KINDS:
            bias_role = "bias_t" if self.transposed else "bias"
            return tuple(r for r in roles if r == "weight" or r == bias_role)
        if self.kind == "positional_encoding" and "embedding_t" in self.params:
            return ("embedding_t",) if self.transposed else ("embedding",)
        return roles


def transpose_layer(layer: LayerSpec) -> LayerSpec:
    """
    Return the transposed layer over the same parameter references.

    linear keeps its kind and reads the weight transposed; conv2d becomes
    deconv2d over the same bank (and back); pool2d becomes nearest-neighbour
    upsampling and upsampling becomes pooling; transformer blocks and
    positional encodings are reused unchanged. Input/output shapes and the
    forward/transposed activations are swapped.

    Raises:
        UnsupportedLayerError: if the kind has no transposition rule.
    """
    inverse = INVERSE_KIND.get(layer.kind)
    if inverse is None:
        raise UnsupportedLayerError(f"layer kind '{layer.kind}' cannot be transposed")

    changes: dict[str, object] = {
        "kind": inverse,
        "transposed": not layer.transposed,
        "in_shape": layer.out_shape,
        "out_shape": layer.in_shape,
        "activation": layer.transpose_activation or layer.activation,
        "transpose_activation": layer.activation,
    }
    if layer.kind == "linear" and layer.in_shape is not None:
        changes["units"] = layer.in_shape[-1]
    if layer.kind in ("conv2d", "deconv2d") and layer.in_shape is not None:
        changes["channels"] = layer.in_shape[0]
    return layer.model_copy(update=changes)


def infer_out_shape(layer: LayerSpec, in_shape: Shape) -> Shape:
    """Per-sample output shape of `layer` for `in_shape` (raises ValueError)."""
    kind = layer.kind
    if kind == "linear":
        if layer.units is None or len(in_shape) not in (1, 2):
            raise ValueError(f"linear needs units and a [N] or [T, N] input, got {in_shape}")
        return (*in_shape[:-1], layer.units)
    if kind in ("conv2d", "deconv2d"):
        if layer.channels is None or len(in_shape) != 3:
            raise ValueError(f"{kind} needs channels and a [C, H, W] input, got {in_shape}")
        if layer.out_shape is not None and layer.transposed:
            return layer.out_shape
        _, height, width = in_shape
        k, s, p = layer.kernel, layer.stride, layer.padding
        if kind == "conv2d":
            if k > height + 2 * p or k > width + 2 * p:
                raise ValueError(f"kernel {k} larger than padded input {in_shape}")
            return (layer.channels, (height + 2 * p - k) // s + 1, (width + 2 * p - k) // s + 1)
        out_h, out_w = (height - 1) * s - 2 * p + k, (width - 1) * s - 2 * p + k
        if out_h <= 0 or out_w <= 0:
            raise ValueError(f"deconv output {out_h}x{out_w} not positive")
        return (layer.channels, out_h, out_w)
    if kind == "pool2d":
        if len(in_shape) != 3:
            raise ValueError(f"pool2d needs a [C, H, W] input, got {in_shape}")
        if layer.out_shape is not None and layer.transposed:
            return layer.out_shape
        c, h, w = in_shape
        return (c, math.ceil(h / layer.size), math.ceil(w / layer.size))
    if kind == "upsample":
        if len(in_shape) != 3:
            raise ValueError(f"upsample needs a [C, H, W] input, got {in_shape}")
        if layer.out_shape is not None and layer.transposed:
            return layer.out_shape
        c, h, w = in_shape
        return (c, h * layer.size, w * layer.size)
    if kind == "flatten":
        return (math.prod(in_shape),)
    if kind in ("unflatten", "from_tokens", "token_unpool"):
        if layer.out_shape is None:
            raise ValueError(f"{kind} needs an explicit out_shape")
        return layer.out_shape
    if kind == "to_tokens":
        if len(in_shape) != 3:
            raise ValueError(f"to_tokens needs a [D, h, w] input, got {in_shape}")
        d, h, w = in_shape
        return (h * w, d)
    if kind == "token_pool":
        if len(in_shape) != 2:
            raise ValueError(f"token_pool needs a [T, D] input, got {in_shape}")
        return (in_shape[1],)
    if kind in ("transformer_block", "positional_encoding"):
        if len(in_shape) != 2:
            raise ValueError(f"{kind} needs a [T, D] input, got {in_shape}")
        if kind == "transformer_block" and in_shape[1] % layer.heads:
            raise ValueError(f"embed dim {in_shape[1]} not divisible by {layer.heads} heads")
        return in_shape
    raise UnsupportedLayerError(f"unknown layer kind '{kind}'")


__all__ = [
    "LayerKind",
    "LayerSpec",
    "Shape",
    "INVERSE_KIND",
    "PARAMETRIC_KINDS",
    "transpose_layer",
    "infer_out_shape",
]
