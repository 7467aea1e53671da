"""
Reader for the IDX binary format used by MNIST.

    offset  type    value
    0       u32 BE  magic (0x00000803 images, 0x00000801 labels)
    4       u32 BE  item count
    8       u32 BE  rows        (images only)
    12      u32 BE  columns     (images only)
    16/8    u8[]    payload

Files ending in `.gz` are decompressed transparently.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import FormatError
from transpose_kit.log import get_logger

from .dataset import LabeledDataset, Split

logger = get_logger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_FILES: dict[str, tuple[str, str]] = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _read_bytes(path: Path) -> bytes:
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as handle:
            return handle.read()
    return path.read_bytes()


def _header(raw: bytes, fields: int, path: Path) -> tuple[int, ...]:
    size = 4 * fields
    if len(raw) < size:
        raise FormatError(f"{path}: header needs {size} bytes, file has {len(raw)}", len(raw))
    return struct.unpack(f">{fields}I", raw[:size])


def _payload(raw: bytes, start: int, expected: int, path: Path) -> Array:
    actual = len(raw) - start
    if actual < expected:
        raise FormatError(
            f"{path}: truncated payload, expected {expected} bytes, found {actual}",
            start + actual,
        )
    return np.frombuffer(raw, dtype=np.uint8, count=expected, offset=start)


def read_idx_images(path: Path) -> Array:
    """uint8 images `[m, rows, cols]`."""
    raw = _read_bytes(path)
    magic, count, rows, cols = _header(raw, 4, path)
    if magic != IMAGE_MAGIC:
        raise FormatError(f"{path}: bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}", 0)
    return _payload(raw, 16, count * rows * cols, path).reshape(count, rows, cols)


def read_idx_labels(path: Path) -> Array:
    raw = _read_bytes(path)
    magic, count = _header(raw, 2, path)
    if magic != LABEL_MAGIC:
        raise FormatError(f"{path}: bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}", 0)
    return _payload(raw, 8, count, path)


def load_idx(
    images_path: Path, labels_path: Path, split: Split = "train", num_classes: int = 10
) -> LabeledDataset:
    """
    Load an image/label IDX pair with pixels scaled to [0, 1].

    Raises:
        FormatError: bad magic, truncation, or an image/label count mismatch
            (each names the byte offset involved).
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if len(images) != len(labels):
        raise FormatError(
            f"{images_path.name} holds {len(images)} images but {labels_path.name} "
            f"holds {len(labels)} labels",
            4,
        )
    logger.info(
        "Loaded IDX dataset",
        extra={"images": str(images_path), "samples": len(labels), "split": split},
    )
    return LabeledDataset(
        (images.astype(np.float32) / 255.0)[:, None],
        labels.astype(np.int64),
        num_classes,
        split,
        images_path.stem,
    )


def _find(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(directory / stem)


def load_mnist(directory: Path, split: Split = "train") -> LabeledDataset:
    """Load MNIST from a directory holding the four standard (optionally gzipped) files."""
    images_stem, labels_stem = MNIST_FILES[split]
    return load_idx(_find(directory, images_stem), _find(directory, labels_stem), split)


def write_idx_images(path: Path, images: Array) -> None:
    """Write uint8 `[m, rows, cols]` images as IDX (used for fixtures and exports)."""
    count, rows, cols = images.shape
    path.write_bytes(
        struct.pack(">4I", IMAGE_MAGIC, count, rows, cols) + images.astype(np.uint8).tobytes()
    )


def write_idx_labels(path: Path, labels: Array) -> None:
    path.write_bytes(struct.pack(">2I", LABEL_MAGIC, len(labels)) + labels.astype(np.uint8).tobytes())


__all__ = [
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
    "read_idx_images",
    "read_idx_labels",
    "load_idx",
    "load_mnist",
    "write_idx_images",
    "write_idx_labels",
]
