"""
Steganographic baselines that hide raw bytes inside model parameters.

- `lsb`: the b lowest mantissa bits of every float32 parameter.
- `last_bytes`: the 3 least-significant bytes of every parameter's 4-byte
  little-endian representation.
- `dead_kernel`: the output units (linear columns, conv filters) with the
  smallest L1 norm are overwritten with payload data.

Payload bits are consumed little-endian: bit k of the payload is bit
`k % 8` of byte `k // 8`, and fills parameter bits from the lowest upward.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from pathlib import Path
from typing import Literal

import numpy as np
import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import CapacityExceededError, IntegrityError, ParameterError
from transpose_kit.log import get_logger
from transpose_kit.nn.model import Model

logger = get_logger(__name__)

StegoMethod = Literal["lsb", "last_bytes", "dead_kernel"]
DeadKernelEncoding = Literal["raw", "pixel"]


class KernelUnit(BaseModel):
    """One swappable output unit: `param[index]` along `axis`."""

    model_config = ConfigDict(frozen=True)

    param: str
    axis: int
    index: int
    size: int


class StegoManifest(BaseModel):
    """Everything needed to pull a payload back out of a model."""

    model_config = ConfigDict(extra="forbid")

    method: StegoMethod
    bits_per_param: int | None = None
    encoding: DeadKernelEncoding | None = None
    payload_bytes: int
    payload_sha256: str
    capacity_bytes: int
    capacity_used: float = Field(ge=0.0, le=1.0)
    param_shapes: dict[str, list[int]]
    units: list[KernelUnit] = Field(default_factory=list)
    image_shapes: list[list[int]] = Field(default_factory=list)


# Payload helpers


def images_to_payload(images: Array) -> tuple[bytes, list[list[int]]]:
    """Quantize [0, 1] images to one byte per pixel."""
    quantized = np.clip(np.rint(np.asarray(images) * 255.0), 0, 255).astype(np.uint8)
    shapes = [list(image.shape) for image in quantized]
    return quantized.tobytes(), shapes


def payload_to_images(payload: bytes, shapes: Sequence[Sequence[int]]) -> Array:
    """Inverse of `images_to_payload`; returns float32 images in [0, 1]."""
    flat = np.frombuffer(payload, dtype=np.uint8)
    images = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        images.append(flat[offset : offset + size].reshape(shape).astype(np.float32) / 255.0)
        offset += size
    return np.stack(images) if images else np.zeros((0,), dtype=np.float32)


def bit_error_rate(sent: bytes, received: bytes) -> float:
    """Fraction of differing bits (length mismatch counts the missing bits as wrong)."""
    if not sent:
        return 0.0
    a = np.frombuffer(sent, dtype=np.uint8)
    b = np.frombuffer(received[: len(sent)].ljust(len(sent), b"\0"), dtype=np.uint8)
    return float(np.unpackbits(a ^ b).mean())


# Flat parameter access


def _param_names(model: Model) -> list[str]:
    return list(model.params)


def _flat_words(model: Model) -> Array:
    """All parameters as one little-endian uint32 word array (a copy)."""
    return np.concatenate(
        [np.ascontiguousarray(model.params[n].data, dtype="<f4").view("<u4").ravel() for n in _param_names(model)]
    )


def _write_words(model: Model, words: Array) -> None:
    offset = 0
    for name in _param_names(model):
        tensor = model.params[name]
        count = tensor.size
        block = words[offset : offset + count].view("<f4").reshape(tensor.shape)
        tensor.data[...] = block.astype(np.float32)
        offset += count


def _pack_bits(payload: bytes, bits: int, slots: int) -> Array:
    stream = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
    padded = np.zeros(slots * bits, dtype=np.uint32)
    padded[: stream.size] = stream
    weights = np.left_shift(np.uint32(1), np.arange(bits, dtype=np.uint32))
    return (padded.reshape(slots, bits) * weights).sum(axis=1, dtype=np.uint32)


def _unpack_bits(values: Array, bits: int, length: int) -> bytes:
    shifts = np.arange(bits, dtype=np.uint32)
    stream = ((values[:, None] >> shifts) & np.uint32(1)).astype(np.uint8).ravel()
    return np.packbits(stream[: 8 * length], bitorder="little").tobytes()


# Capacity


def low_bits_capacity(model: Model, bits: int) -> int:
    return model.num_parameters() * bits // 8


def kernel_units(model: Model) -> list[tuple[KernelUnit, float]]:
    """Every output unit of the forward model's weights with its L1 norm."""
    forward = model.as_forward()
    units: list[tuple[KernelUnit, float]] = []
    for layer in forward.layers:
        if not layer.parametric:
            continue
        name = layer.params["weight"]
        weight = forward.params[name].data
        # linear [in, out]: columns; conv2d [M, C, K, K]: filters; deconv2d [C, M, K, K]: axis 1.
        axis = 1 if layer.kind in ("linear", "deconv2d") else 0
        norms = np.abs(weight).sum(axis=tuple(a for a in range(weight.ndim) if a != axis))
        size = weight.size // weight.shape[axis]
        units.extend(
            (KernelUnit(param=name, axis=axis, index=i, size=size), float(norm))
            for i, norm in enumerate(norms)
        )
    return units


def _unit_bytes(unit: KernelUnit, encoding: DeadKernelEncoding) -> int:
    return unit.size * (4 if encoding == "raw" else 1)


def dead_kernel_capacity(model: Model, encoding: DeadKernelEncoding = "raw") -> int:
    return sum(_unit_bytes(unit, encoding) for unit, _ in kernel_units(model))


def _unit_view(model: Model, unit: KernelUnit) -> Array:
    return np.moveaxis(model.params[unit.param].data, unit.axis, 0)[unit.index]


def _check_capacity(payload: int, capacity: int, method: str) -> None:
    if payload > capacity:
        raise CapacityExceededError(
            f"{method}: payload of {payload} bytes exceeds capacity of {capacity} bytes"
        )


def stego_embed(
    model: Model,
    payload: bytes,
    method: StegoMethod,
    bits_per_param: int = 8,
    encoding: DeadKernelEncoding = "raw",
    image_shapes: Sequence[Sequence[int]] = (),
) -> tuple[Model, StegoManifest]:
    """
    Hide `payload` in a copy of `model`.

    Raises:
        CapacityExceededError: payload larger than the method's capacity
            (the message names both sizes).
        ParameterError: `bits_per_param` outside [1, 23].
    """
    carrier = model.clone()
    shapes = {name: list(t.shape) for name, t in carrier.params.items()}
    common = {
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "param_shapes": shapes,
        "image_shapes": [list(s) for s in image_shapes],
    }

    if method in ("lsb", "last_bytes"):
        bits = 24 if method == "last_bytes" else bits_per_param
        if method == "lsb" and not 1 <= bits <= 23:
            raise ParameterError(f"lsb bits per parameter must be in [1, 23], got {bits}")
        capacity = low_bits_capacity(carrier, bits)
        _check_capacity(len(payload), capacity, method)
        words = _flat_words(carrier)
        slots = min(len(words), -(-8 * len(payload) // bits))
        mask = np.uint32((1 << bits) - 1)
        words[:slots] = (words[:slots] & ~mask) | _pack_bits(payload, bits, slots)
        _write_words(carrier, words)
        manifest = StegoManifest(
            method=method,
            bits_per_param=bits,
            capacity_bytes=capacity,
            capacity_used=len(payload) / capacity if capacity else 0.0,
            **common,
        )
    elif method == "dead_kernel":
        capacity = dead_kernel_capacity(carrier, encoding)
        _check_capacity(len(payload), capacity, method)
        ranked = sorted(kernel_units(carrier), key=lambda pair: pair[1])
        chosen: list[KernelUnit] = []
        filled = 0
        for unit, _ in ranked:
            if filled >= len(payload):
                break
            chosen.append(unit)
            filled += _unit_bytes(unit, encoding)
        data = payload.ljust(filled, b"\0")
        offset = 0
        for unit in chosen:
            width = _unit_bytes(unit, encoding)
            chunk = data[offset : offset + width]
            if encoding == "raw":
                values = np.frombuffer(chunk, dtype="<f4").astype(np.float32)
            else:
                values = np.frombuffer(chunk, dtype=np.uint8).astype(np.float32) / 255.0
            view = _unit_view(carrier, unit)
            view[...] = values.reshape(view.shape)
            offset += width
        manifest = StegoManifest(
            method=method,
            encoding=encoding,
            capacity_bytes=capacity,
            capacity_used=len(payload) / capacity if capacity else 0.0,
            units=chosen,
            **common,
        )
    else:
        raise ParameterError(f"unknown stego method '{method}'")

    logger.info(
        "Embedded payload",
        extra={"method": method, "bytes": len(payload), "capacity_used": manifest.capacity_used},
    )
    return carrier, manifest


def stego_extract(model: Model, manifest: StegoManifest) -> bytes:
    """
    Read the payload described by `manifest` back out of `model`.

    Raises:
        IntegrityError: if the model's parameter layout differs from the manifest.
    """
    shapes = {name: list(t.shape) for name, t in model.params.items()}
    if shapes != manifest.param_shapes or list(shapes) != list(manifest.param_shapes):
        raise IntegrityError("model parameter layout does not match the stego manifest")
    length = manifest.payload_bytes

    if manifest.method in ("lsb", "last_bytes"):
        bits = manifest.bits_per_param or 8
        slots = -(-8 * length // bits)
        mask = np.uint32((1 << bits) - 1)
        return _unpack_bits(_flat_words(model)[:slots] & mask, bits, length)

    chunks = []
    for unit in manifest.units:
        view = _unit_view(model, unit).ravel()
        if manifest.encoding == "raw":
            chunks.append(np.ascontiguousarray(view, dtype="<f4").tobytes())
        else:
            chunks.append(
                np.clip(np.rint(np.nan_to_num(view) * 255.0), 0, 255).astype(np.uint8).tobytes()
            )
    return b"".join(chunks)[:length]


def payload_intact(payload: bytes, manifest: StegoManifest) -> bool:
    return hashlib.sha256(payload).hexdigest() == manifest.payload_sha256


def manifest_path(model_path: Path) -> Path:
    """Where the manifest for a carrier model file lives."""
    return model_path.with_suffix(".stego.json")


def save_manifest(manifest: StegoManifest, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(
        orjson.dumps(manifest.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)
    )
    return path


def load_manifest(path: Path) -> StegoManifest:
    """
    Raises:
        IntegrityError: if the file is not a valid stego manifest.
    """
    try:
        return StegoManifest.model_validate(orjson.loads(path.read_bytes()))
    except (orjson.JSONDecodeError, ValidationError) as exc:
        raise IntegrityError(f"{path}: not a stego manifest: {exc}") from exc


__all__ = [
    "StegoMethod",
    "StegoManifest",
    "KernelUnit",
    "DeadKernelEncoding",
    "stego_embed",
    "stego_extract",
    "images_to_payload",
    "payload_to_images",
    "bit_error_rate",
    "payload_intact",
    "low_bits_capacity",
    "dead_kernel_capacity",
    "kernel_units",
    "manifest_path",
    "save_manifest",
    "load_manifest",
]
