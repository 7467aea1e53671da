"""
Bit-exact model serialization.

Layout (all integers little-endian):

    b"TPSM"                 magic
    u16                     format version
    u32                     header length N
    N bytes                 header: orjson, sorted keys
    ...                     parameter blocks, '<f4', in header table order
    32 bytes                SHA-256 of everything before it

The header carries the layer spec table, direction, shapes, the parameter
table (name, shape, byte offset) and free-form metadata such as the indexer
configuration. Parameter bytes are written verbatim, so payloads embedded in
the low mantissa bits survive a save/load cycle.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_args

import numpy as np
import orjson
from pydantic import ValidationError

from transpose_kit.autodiff.tensor import Tensor
from transpose_kit.errors import CorruptionError, VersionError
from transpose_kit.log import get_logger
from transpose_kit.nn.layers import LayerKind, LayerSpec
from transpose_kit.nn.model import Model

logger = get_logger(__name__)

MAGIC = b"TPSM"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_DIGEST_SIZE = 32
_KNOWN_KINDS = frozenset(get_args(LayerKind))


@dataclass
class ModelFile:
    """A decoded model file: the model, its metadata and the stored digest."""

    model: Model
    metadata: dict[str, Any] = field(default_factory=dict)
    digest: str = ""
    version: int = FORMAT_VERSION


def encode_model(model: Model, metadata: dict[str, Any] | None = None) -> bytes:
    """Serialize `model` (and `metadata`) into the file layout above."""
    table = []
    blocks = []
    offset = 0
    for name, tensor in model.params.items():
        block = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
        table.append({"name": name, "shape": list(tensor.shape), "offset": offset})
        blocks.append(block)
        offset += len(block)
    header = orjson.dumps(
        {
            "direction": model.direction,
            "input_shape": list(model.input_shape),
            "output_shape": list(model.output_shape),
            "layers": [layer.model_dump(mode="json") for layer in model.layers],
            "params": table,
            "metadata": metadata or {},
        },
        option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY,
    )
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b"".join(blocks)
    return body + hashlib.sha256(body).digest()


def decode_model(raw: bytes, source: str = "<bytes>") -> ModelFile:
    """
    Parse and verify a serialized model.

    Raises:
        CorruptionError: bad magic, truncation, digest mismatch or an
            unreadable header. No partial model is returned.
        VersionError: unknown format version or layer kind.
    """
    if len(raw) < _PREFIX.size + _DIGEST_SIZE:
        raise CorruptionError(f"{source}: file too short ({len(raw)} bytes)")
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptionError(f"{source}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"{source}: unsupported format version {version}")
    body, digest = raw[:-_DIGEST_SIZE], raw[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CorruptionError(f"{source}: content hash mismatch")
    header_end = _PREFIX.size + header_len
    if header_end > len(body):
        raise CorruptionError(f"{source}: header length {header_len} exceeds file")
    try:
        header = orjson.loads(body[_PREFIX.size : header_end])
    except orjson.JSONDecodeError as exc:
        raise CorruptionError(f"{source}: unreadable header: {exc}") from exc

    try:
        model, metadata = _model_from_header(header, body[header_end:], source)
    except (KeyError, TypeError, AttributeError) as exc:
        raise CorruptionError(f"{source}: malformed header: {exc!r}") from exc
    return ModelFile(model, metadata, digest.hex(), version)


def _model_from_header(
    header: dict[str, Any], blob: bytes, source: str
) -> tuple[Model, dict[str, Any]]:
    for entry in header["layers"]:
        if entry.get("kind") not in _KNOWN_KINDS:
            raise VersionError(f"{source}: unknown layer kind {entry.get('kind')!r}")
    try:
        layers = [LayerSpec.model_validate(entry) for entry in header["layers"]]
    except ValidationError as exc:
        raise CorruptionError(f"{source}: invalid layer table: {exc}") from exc

    params: dict[str, Tensor] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        start = entry["offset"]
        if start + 4 * count > len(blob):
            raise CorruptionError(f"{source}: parameter '{entry['name']}' runs past the end")
        data = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
        params[entry["name"]] = Tensor(
            data.astype(np.float32).reshape(shape), requires_grad=True, name=entry["name"]
        )

    model = Model(
        layers,
        params,
        header["direction"],
        tuple(header["input_shape"]),
        tuple(header["output_shape"]),
    )
    return model, header["metadata"]


def save_model(model: Model, path: Path, metadata: dict[str, Any] | None = None) -> ModelFile:
    raw = encode_model(model, metadata)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(raw)
    digest = raw[-_DIGEST_SIZE:].hex()
    logger.info("Saved model", extra={"path": str(path), "bytes": len(raw), "digest": digest[:12]})
    return ModelFile(model, metadata or {}, digest)


def read_model_file(path: Path) -> ModelFile:
    return decode_model(path.read_bytes(), str(path))


def load_model(path: Path) -> Model:
    return read_model_file(path).model


def model_digest(model: Model) -> str:
    """SHA-256 of the serialized model without metadata (a content identity)."""
    return encode_model(model)[-_DIGEST_SIZE:].hex()


__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "ModelFile",
    "encode_model",
    "decode_model",
    "save_model",
    "read_model_file",
    "load_model",
    "model_digest",
]
