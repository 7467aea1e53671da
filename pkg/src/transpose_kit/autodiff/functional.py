"""
Differentiable neural-network operations on `Tensor`.

Spatial ops accept either a single sample `[C, H, W]` or a batch
`[B, C, H, W]`. Convolution is cross-correlation (no kernel flip) and
`deconv2d` is its exact linear adjoint, which is what the transposed
convolution layers rely on.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, expit

from transpose_kit.errors import DataError, DimensionError, ParameterError

from .tensor import Array, Tensor, as_tensor, make_result

Activation = Literal["relu", "gelu", "sigmoid", "tanh", "identity"]
ACTIVATIONS: tuple[str, ...] = ("relu", "gelu", "sigmoid", "tanh", "identity")

_SQRT_2 = float(np.sqrt(2.0))
_INV_SQRT_2PI = float(1.0 / np.sqrt(2.0 * np.pi))


def _batched(x: Tensor, op: str) -> tuple[Array, bool]:
    if x.ndim == 3:
        return x.data[None], True
    if x.ndim == 4:
        return x.data, False
    raise DimensionError(f"{op} expects [C,H,W] or [B,C,H,W], got {x.shape}")


def _windows(padded: Array, kernel: int, stride: int, rows: int, cols: int) -> Array:
    """Strided K×K patches: [B, C, rows, cols, K, K] (a view, no copy)."""
    view = sliding_window_view(padded, (kernel, kernel), axis=(2, 3))
    return view[:, :, ::stride, ::stride][:, :, :rows, :cols]


def _scatter(
    grad: Array, filters: Array, stride: int, canvas_hw: tuple[int, int]
) -> Array:
    """Adjoint of `_windows` + filter contraction: spread [B,M,h,w] onto [B,C,H,W]."""
    batch, _, rows, cols = grad.shape
    _, channels, kernel, _ = filters.shape
    canvas = np.zeros((batch, channels, *canvas_hw), dtype=grad.dtype)
    for i in range(kernel):
        for j in range(kernel):
            canvas[
                :,
                :,
                i : i + stride * (rows - 1) + 1 : stride,
                j : j + stride * (cols - 1) + 1 : stride,
            ] += np.einsum("bmhw,mc->bchw", grad, filters[:, :, i, j], optimize=True)
    return canvas


def conv2d(x: Tensor, filters: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    2-D cross-correlation of `x` with a filter bank `[M, C, K, K]`.

    Output spatial size is `floor((H + 2p - K) / stride) + 1`.

    Raises:
        DimensionError: on channel mismatch or a kernel larger than the padded input.
        ParameterError: on non-positive stride or negative padding.
    """
    if stride < 1 or padding < 0:
        raise ParameterError(f"conv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    xb, squeeze = _batched(x, "conv2d")
    if filters.ndim != 4 or filters.shape[1] != xb.shape[1]:
        raise DimensionError(f"conv2d filters {filters.shape} do not match input {x.shape}")
    kernel = filters.shape[2]
    height, width = xb.shape[2] + 2 * padding, xb.shape[3] + 2 * padding
    if kernel > height or kernel > width:
        raise DimensionError(
            f"conv2d kernel {kernel} larger than padded input {height}x{width}"
        )
    rows = (height - kernel) // stride + 1
    cols = (width - kernel) // stride + 1
    pad = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    padded = np.pad(xb, pad)
    patches = _windows(padded, kernel, stride, rows, cols)
    out = np.einsum("bchwij,mcij->bmhw", patches, filters.data, optimize=True)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        gb = g[None] if squeeze else g
        grad_filters = np.einsum("bchwij,bmhw->mcij", patches, gb, optimize=True)
        canvas = _scatter(gb, filters.data, stride, (height, width))
        grad_x = canvas[:, :, padding : height - padding, padding : width - padding]
        return (grad_x[0] if squeeze else grad_x), grad_filters

    return make_result(out[0] if squeeze else out, (x, filters), "conv2d", backward_fn)


def deconv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel


def deconv2d(
    x: Tensor,
    filters: Tensor,
    stride: int = 1,
    padding: int = 0,
    output_size: tuple[int, int] | None = None,
) -> Tensor:
    """
    Transposed convolution: maps `[M, H, W]` to `[C, H'', W'']` through the
    bank `[M, C, K, K]` read as `[C, M, K, K]`.

    `H'' = (H - 1) * stride - 2p + K` unless `output_size` pins it to the
    input size of the convolution being inverted (needed when that
    convolution floored away rows).

    Raises:
        DimensionError: when the computed output size is not positive.
    """
    if stride < 1 or padding < 0:
        raise ParameterError(f"deconv2d needs stride >= 1 and padding >= 0, got {stride}, {padding}")
    xb, squeeze = _batched(x, "deconv2d")
    if filters.ndim != 4 or filters.shape[0] != xb.shape[1]:
        raise DimensionError(f"deconv2d filters {filters.shape} do not match input {x.shape}")
    kernel = filters.shape[2]
    rows, cols = xb.shape[2], xb.shape[3]
    out_h, out_w = output_size or (
        deconv_output_size(rows, kernel, stride, padding),
        deconv_output_size(cols, kernel, stride, padding),
    )
    if out_h <= 0 or out_w <= 0:
        raise DimensionError(
            f"deconv2d output size {out_h}x{out_w} is not positive for input {x.shape}"
        )
    canvas_h = max((rows - 1) * stride + kernel, out_h + 2 * padding)
    canvas_w = max((cols - 1) * stride + kernel, out_w + 2 * padding)
    canvas = _scatter(xb, filters.data, stride, (canvas_h, canvas_w))
    out = canvas[:, :, padding : padding + out_h, padding : padding + out_w]

    def backward_fn(g: Array) -> Sequence[Array | None]:
        gb = g[None] if squeeze else g
        padded = np.zeros((gb.shape[0], gb.shape[1], canvas_h, canvas_w), dtype=gb.dtype)
        padded[:, :, padding : padding + out_h, padding : padding + out_w] = gb
        patches = _windows(padded, kernel, stride, rows, cols)
        grad_x = np.einsum("bchwij,mcij->bmhw", patches, filters.data, optimize=True)
        grad_filters = np.einsum("bchwij,bmhw->mcij", patches, xb, optimize=True)
        return (grad_x[0] if squeeze else grad_x), grad_filters

    return make_result(
        np.ascontiguousarray(out[0] if squeeze else out), (x, filters), "deconv2d", backward_fn
    )


def pool2d(x: Tensor, kind: Literal["max", "avg"], size: int) -> Tensor:
    """
    Non-overlapping `size`×`size` pooling per channel.

    Inputs whose height or width is not divisible by `size` are zero-padded
    on the bottom/right. Max-pool gradients go to the first maximal element
    in row-major order.
    """
    if size <= 0:
        raise ParameterError(f"pool size must be positive, got {size}")
    if kind not in ("max", "avg"):
        raise ParameterError(f"unknown pool kind '{kind}'")
    xb, squeeze = _batched(x, "pool2d")
    batch, channels, height, width = xb.shape
    rows, cols = -(-height // size), -(-width // size)
    padded = np.pad(xb, ((0, 0), (0, 0), (0, rows * size - height), (0, cols * size - width)))
    blocks = padded.reshape(batch, channels, rows, size, cols, size)

    if kind == "avg":
        out = blocks.mean(axis=(3, 5), dtype=np.float64).astype(xb.dtype)

        def backward_fn(g: Array) -> Sequence[Array | None]:
            gb = g[None] if squeeze else g
            spread = np.broadcast_to(
                (gb / (size * size))[:, :, :, None, :, None],
                (batch, channels, rows, size, cols, size),
            ).reshape(batch, channels, rows * size, cols * size)
            grad = spread[:, :, :height, :width]
            return (grad[0] if squeeze else np.ascontiguousarray(grad),)

    else:
        flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(batch, channels, rows, cols, size * size)
        winners = np.argmax(flat, axis=-1)
        out = np.take_along_axis(flat, winners[..., None], axis=-1)[..., 0]

        def backward_fn(g: Array) -> Sequence[Array | None]:
            gb = g[None] if squeeze else g
            routed = np.zeros_like(flat)
            np.put_along_axis(routed, winners[..., None], gb[..., None], axis=-1)
            grad = (
                routed.reshape(batch, channels, rows, cols, size, size)
                .transpose(0, 1, 2, 4, 3, 5)
                .reshape(batch, channels, rows * size, cols * size)[:, :, :height, :width]
            )
            return (grad[0] if squeeze else np.ascontiguousarray(grad),)

    return make_result(out[0] if squeeze else out, (x,), f"pool2d_{kind}", backward_fn)


def upsample_nn(x: Tensor, factor: int) -> Tensor:
    """Nearest-neighbour upsampling: every pixel becomes a factor×factor block."""
    if factor < 1:
        raise ParameterError(f"upsample factor must be >= 1, got {factor}")
    if x.ndim < 2:
        raise DimensionError(f"upsample needs spatial axes, got {x.shape}")
    out = x.data.repeat(factor, axis=-2).repeat(factor, axis=-1)
    height, width = x.shape[-2], x.shape[-1]

    def backward_fn(g: Array) -> Sequence[Array | None]:
        lead = g.shape[:-2]
        return (g.reshape(*lead, height, factor, width, factor).sum(axis=(-3, -1)),)

    return make_result(out, (x,), "upsample_nn", backward_fn)


def activation(x: Tensor, kind: str) -> Tensor:
    """
    Apply an elementwise activation with its analytic derivative.

    Raises:
        ParameterError: for an unknown activation name.
    """
    if kind == "identity":
        return x
    data = x.data
    if kind == "relu":
        mask = data > 0
        out = np.where(mask, data, 0).astype(data.dtype)

        def backward_fn(g: Array) -> Sequence[Array | None]:
            return (g * mask,)

    elif kind == "sigmoid":
        out = expit(data)

        def backward_fn(g: Array) -> Sequence[Array | None]:
            return (g * out * (1 - out),)

    elif kind == "tanh":
        out = np.tanh(data)

        def backward_fn(g: Array) -> Sequence[Array | None]:
            return (g * (1 - out * out),)

    elif kind == "gelu":
        cdf = 0.5 * (1.0 + erf(data / _SQRT_2))
        out = data * cdf

        def backward_fn(g: Array) -> Sequence[Array | None]:
            pdf = _INV_SQRT_2PI * np.exp(-0.5 * data * data)
            return (g * (cdf + data * pdf),)

    else:
        raise ParameterError(f"unknown activation '{kind}'")
    return make_result(out, (x,), kind, backward_fn)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = exp / exp.sum(axis=axis, keepdims=True)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), "softmax", backward_fn)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by `gamma` and shift by `beta`."""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise DimensionError(f"layer_norm params {gamma.shape}/{beta.shape} vs input {x.shape}")
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    normalized = centered * inv_std
    out = normalized * gamma.data + beta.data
    features = x.shape[-1]
    lead_axes = tuple(range(x.ndim - 1))

    def backward_fn(g: Array) -> Sequence[Array | None]:
        grad_norm = g * gamma.data
        grad_x = (inv_std / features) * (
            features * grad_norm
            - grad_norm.sum(axis=-1, keepdims=True)
            - normalized * (grad_norm * normalized).sum(axis=-1, keepdims=True)
        )
        return (
            grad_x,
            (g * normalized).sum(axis=lead_axes),
            g.sum(axis=lead_axes),
        )

    return make_result(out, (x, gamma, beta), "layer_norm", backward_fn)


def cross_entropy(logits: Tensor, labels: Array) -> Tensor:
    """
    Mean softmax cross-entropy of `[B, K]` logits against integer labels.

    Raises:
        DataError: for labels outside `[0, K)` or a batch-size mismatch.
    """
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects [B, K] logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    batch, classes = logits.shape
    if labels.shape != (batch,):
        raise DataError(f"labels shape {labels.shape} does not match batch {batch}")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DataError(f"label out of range [0, {classes})")
    wide = logits.data.astype(np.float64)
    shifted = wide - wide.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_probs[np.arange(batch), labels].mean()

    def backward_fn(g: Array) -> Sequence[Array | None]:
        grad = np.exp(log_probs)
        grad[np.arange(batch), labels] -= 1.0
        return ((grad * (g / batch)).astype(logits.data.dtype),)

    return make_result(np.asarray(loss), (logits,), "cross_entropy", backward_fn)


def mse(prediction: Tensor, target: Tensor | Array) -> Tensor:
    """Mean squared error over all elements (accumulated in float64)."""
    target_t = as_tensor(target)
    if prediction.shape != target_t.shape:
        raise DimensionError(f"mse shape mismatch: {prediction.shape} vs {target_t.shape}")
    diff = prediction.data.astype(np.float64) - target_t.data.astype(np.float64)
    count = max(diff.size, 1)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        grad = (2.0 / count) * diff * g
        return grad.astype(prediction.data.dtype), (-grad).astype(target_t.data.dtype)

    return make_result(
        np.asarray((diff * diff).sum() / count), (prediction, target_t), "mse", backward_fn
    )


__all__ = [
    "ACTIVATIONS",
    "Activation",
    "conv2d",
    "deconv2d",
    "deconv_output_size",
    "pool2d",
    "upsample_nn",
    "activation",
    "softmax",
    "layer_norm",
    "cross_entropy",
    "mse",
]
