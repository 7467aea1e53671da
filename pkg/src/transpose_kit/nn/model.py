"""
Sequential models over a shared parameter store.

`transpose_model` reverses the layer order and transposes every layer while
keeping the very same parameter `Tensor` objects, so gradients computed
through the transposed model land on the buffers the forward model reads.
"""

from __future__ import annotations

import copy
import math
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from typing import Literal

import numpy as np

from transpose_kit.autodiff import functional as F
from transpose_kit.autodiff.tensor import (
    Array,
    Tensor,
    add,
    matmul,
    mean_axis,
    mul,
    permute,
    reshape,
    swap_last,
)
from transpose_kit.errors import ConstructionError, DimensionError
from transpose_kit.log import get_logger

from .blocks import TRANSFORMER_ROLES, crop2d, transformer_block
from .layers import LayerSpec, Shape, infer_out_shape, transpose_layer

logger = get_logger(__name__)

Direction = Literal["forward", "transposed"]
ParameterStore = dict[str, Tensor]


class Model:
    """
    An ordered list of `LayerSpec` executed over a shared `ParameterStore`.

    Attributes:
        layers: Layer specs in execution order.
        params: Named parameter tensors, shared with the transposed model.
        direction: "forward" or "transposed".
        input_shape: Per-sample input shape in this direction.
        output_shape: Per-sample output shape in this direction.
    """

    def __init__(
        self,
        layers: Sequence[LayerSpec],
        params: ParameterStore,
        direction: Direction,
        input_shape: Shape,
        output_shape: Shape,
    ) -> None:
        self.layers = list(layers)
        self.params = params
        self.direction: Direction = direction
        self.input_shape = tuple(input_shape)
        self.output_shape = tuple(output_shape)

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def forward(self, x: Tensor) -> Tensor:
        """Apply every layer to a batch `[B, *input_shape]`."""
        if x.shape[1:] != self.input_shape:
            raise DimensionError(
                f"layer 0: expected input [B, {', '.join(map(str, self.input_shape))}], got {x.shape}"
            )
        for index, layer in enumerate(self.layers):
            try:
                x = apply_layer(layer, self.params, x)
            except DimensionError as exc:
                raise DimensionError(f"layer {index} ({layer.kind}): {exc}") from exc
        return x

    def parameters(self) -> list[Tensor]:
        """Parameters read in this direction, in layer order, without duplicates."""
        seen: set[int] = set()
        found: list[Tensor] = []
        for layer in self.layers:
            for role in layer.active_roles():
                tensor = self.params[layer.params[role]]
                if id(tensor) not in seen:
                    seen.add(id(tensor))
                    found.append(tensor)
        return found

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield from self.params.items()

    def num_parameters(self) -> int:
        return sum(t.size for t in self.params.values())

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.grad = None

    @contextmanager
    def frozen(self) -> Iterator[Model]:
        """Temporarily stop parameters from requiring gradients."""
        previous = {name: t.requires_grad for name, t in self.params.items()}
        for tensor in self.params.values():
            tensor.requires_grad = False
        try:
            yield self
        finally:
            for name, tensor in self.params.items():
                tensor.requires_grad = previous[name]

    def transpose(self) -> Model:
        return transpose_model(self)

    def as_forward(self) -> Model:
        return self if self.direction == "forward" else self.transpose()

    def as_transposed(self) -> Model:
        return self if self.direction == "transposed" else self.transpose()

    def clone(self) -> Model:
        """Deep copy with independent parameter buffers."""
        params = {
            name: Tensor(t.data.copy(), requires_grad=t.requires_grad, name=name)
            for name, t in self.params.items()
        }
        return Model(
            copy.deepcopy(self.layers), params, self.direction, self.input_shape, self.output_shape
        )

    def weight_view(self, index: int) -> Array:
        """
        The weight of layer `index` as this direction's operation reads it.

        Transposed linear layers see `W.T` and deconvolutions see the bank with
        its first two axes swapped; both are numpy views of the stored buffer.
        """
        layer = self.layers[index]
        weight = self.params[layer.params["weight"]].data
        if layer.kind == "linear" and layer.transposed:
            return weight.T
        if layer.kind == "deconv2d":
            return np.swapaxes(weight, 0, 1)
        return weight

    def __repr__(self) -> str:
        kinds = ", ".join(layer.kind for layer in self.layers)
        return f"Model({self.direction}: {self.input_shape} -> {self.output_shape}; {kinds})"


def _bias(layer: LayerSpec, params: ParameterStore) -> Tensor | None:
    role = "bias_t" if layer.transposed else "bias"
    key = layer.params.get(role)
    return params[key] if key is not None else None


def apply_layer(layer: LayerSpec, params: ParameterStore, x: Tensor) -> Tensor:
    """Run one layer (operation, then bias, then activation) on a batch."""
    kind = layer.kind
    batch = x.shape[0]
    if kind == "linear":
        weight = params[layer.params["weight"]]
        y = matmul(x, swap_last(weight) if layer.transposed else weight)
        bias = _bias(layer, params)
        if bias is not None:
            y = add(y, bias)
    elif kind in ("conv2d", "deconv2d"):
        weight = params[layer.params["weight"]]
        if kind == "conv2d":
            y = F.conv2d(x, weight, layer.stride, layer.padding)
        else:
            assert layer.out_shape is not None
            y = F.deconv2d(
                x, weight, layer.stride, layer.padding, output_size=layer.out_shape[1:]
            )
        bias = _bias(layer, params)
        if bias is not None:
            y = add(y, reshape(bias, (bias.size, 1, 1)))
    elif kind == "pool2d":
        y = F.pool2d(x, layer.pool, layer.size)
    elif kind == "upsample":
        y = F.upsample_nn(x, layer.size)
        if layer.out_shape is not None and y.shape[2:] != layer.out_shape[1:]:
            y = crop2d(y, *layer.out_shape[1:])
    elif kind == "flatten":
        y = reshape(x, (batch, -1))
    elif kind in ("unflatten",):
        assert layer.out_shape is not None
        y = reshape(x, (batch, *layer.out_shape))
    elif kind == "to_tokens":
        d, h, w = x.shape[1:]
        y = permute(reshape(x, (batch, d, h * w)), (0, 2, 1))
    elif kind == "from_tokens":
        assert layer.out_shape is not None
        y = reshape(permute(x, (0, 2, 1)), (batch, *layer.out_shape))
    elif kind == "token_pool":
        y = mean_axis(x, 1)
    elif kind == "token_unpool":
        assert layer.out_shape is not None
        tokens = layer.out_shape[0]
        y = mul(reshape(x, (batch, 1, x.shape[1])), np.ones((1, tokens, 1), dtype=x.data.dtype))
    elif kind == "positional_encoding":
        role = layer.active_roles()[0]
        y = add(x, params[layer.params[role]])
    elif kind == "transformer_block":
        block = {role: params[layer.params[role]] for role in TRANSFORMER_ROLES}
        y = transformer_block(x, block, layer.heads)
    else:
        raise ConstructionError(f"no executor for layer kind '{kind}'")
    return F.activation(y, layer.activation)


def _kaiming_uniform(rng: np.random.Generator, shape: Shape, fan_in: int) -> Array:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def _init_params(
    layer: LayerSpec, index: int, in_shape: Shape, rng: np.random.Generator
) -> dict[str, Array]:
    kind = layer.kind
    if kind == "linear":
        assert layer.units is not None
        fan_in = in_shape[-1]
        arrays = {"weight": _kaiming_uniform(rng, (fan_in, layer.units), fan_in)}
        if layer.bias:
            arrays["bias"] = np.zeros(layer.units, dtype=np.float32)
            arrays["bias_t"] = np.zeros(fan_in, dtype=np.float32)
        return arrays
    if kind in ("conv2d", "deconv2d"):
        assert layer.channels is not None
        c_in, k = in_shape[0], layer.kernel
        # The bank is always stored [M, C, K, K] with M the conv2d output side.
        bank = (layer.channels, c_in, k, k) if kind == "conv2d" else (c_in, layer.channels, k, k)
        arrays = {"weight": _kaiming_uniform(rng, bank, c_in * k * k)}
        if layer.bias:
            arrays["bias"] = np.zeros(layer.channels, dtype=np.float32)
            arrays["bias_t"] = np.zeros(c_in, dtype=np.float32)
        return arrays
    if kind == "positional_encoding":
        arrays = {"embedding": (0.02 * rng.standard_normal(in_shape)).astype(np.float32)}
        if not layer.share_transposed:
            arrays["embedding_t"] = (0.02 * rng.standard_normal(in_shape)).astype(np.float32)
        return arrays
    if kind == "transformer_block":
        d = in_shape[-1]
        hidden = layer.mlp_dim or 3 * d
        shapes: dict[str, Shape] = {
            "wq": (d, d),
            "wk": (d, d),
            "wv": (d, d),
            "wo": (d, d),
            "w1": (d, hidden),
            "w2": (hidden, d),
        }
        arrays = {
            role: (0.02 * rng.standard_normal(shape)).astype(np.float32)
            for role, shape in shapes.items()
        }
        for role, width in (("bq", d), ("bk", d), ("bv", d), ("bo", d), ("b1", hidden), ("b2", d)):
            arrays[role] = np.zeros(width, dtype=np.float32)
        for prefix in ("ln1", "ln2"):
            arrays[f"{prefix}_gamma"] = np.ones(d, dtype=np.float32)
            arrays[f"{prefix}_beta"] = np.zeros(d, dtype=np.float32)
        return arrays
    return {}


def build_model(
    specs: Sequence[LayerSpec],
    input_shape: Shape,
    seed: int = 0,
    image_activation: str = "sigmoid",
) -> Model:
    """
    Infer shapes, allocate parameters and return a forward-direction model.

    Linear/conv layers get Kaiming-uniform weights and zero biases (plus a
    separate zero bias for the transposed direction); transformer parameters
    are drawn from N(0, 0.02²). The first parametric layer's transposed
    activation defaults to `image_activation` so the transposed model emits
    pixels in [0, 1]; other layers default to k' = k.

    Raises:
        ConstructionError: for an empty spec list or incompatible shapes
            (names the offending layer index).
    """
    if not specs:
        raise ConstructionError("cannot build a model from an empty layer list")
    rng = np.random.default_rng(seed)
    params: ParameterStore = {}
    built: list[LayerSpec] = []
    shape = tuple(input_shape)
    first_parametric = True

    for index, spec in enumerate(specs):
        if spec.in_shape is not None and tuple(spec.in_shape) != shape:
            raise ConstructionError(
                f"declared input {spec.in_shape} does not match incoming {shape}", index
            )
        try:
            out_shape = infer_out_shape(spec, shape)
        except ValueError as exc:
            raise ConstructionError(str(exc), index) from exc

        arrays = _init_params(spec, index, shape, rng)
        refs = {}
        for role, array in arrays.items():
            key = f"layer{index}.{role}"
            params[key] = Tensor(array, requires_grad=True, name=key)
            refs[role] = key

        transpose_activation = spec.transpose_activation
        if transpose_activation is None:
            transpose_activation = (
                image_activation if spec.parametric and first_parametric else spec.activation
            )
        first_parametric = first_parametric and not spec.parametric

        built.append(
            spec.model_copy(
                update={
                    "in_shape": shape,
                    "out_shape": out_shape,
                    "params": refs,
                    "transpose_activation": transpose_activation,
                }
            )
        )
        shape = out_shape

    logger.debug(
        "Built model",
        extra={"layers": len(built), "parameters": sum(t.size for t in params.values())},
    )
    return Model(built, params, "forward", tuple(input_shape), shape)


def _relocate_positional_encoding(layers: list[LayerSpec]) -> list[LayerSpec]:
    """Move positional encodings to the front of the transformer-block run."""
    encodings = [layer for layer in layers if layer.kind == "positional_encoding"]
    if not encodings or not any(layer.kind == "transformer_block" for layer in layers):
        return layers
    rest = [layer for layer in layers if layer.kind != "positional_encoding"]
    first_block = next(i for i, layer in enumerate(rest) if layer.kind == "transformer_block")
    return rest[:first_block] + encodings + rest[first_block:]


def transpose_model(model: Model) -> Model:
    """
    Reverse the layer order and transpose each layer over shared storage.

    Raises:
        UnsupportedLayerError: propagated from `transpose_layer`.
    """
    layers = [transpose_layer(layer) for layer in reversed(model.layers)]
    layers = _relocate_positional_encoding(layers)
    direction: Direction = "transposed" if model.direction == "forward" else "forward"
    return Model(layers, model.params, direction, model.output_shape, model.input_shape)


__all__ = [
    "Model",
    "Direction",
    "ParameterStore",
    "apply_layer",
    "build_model",
    "transpose_model",
]
