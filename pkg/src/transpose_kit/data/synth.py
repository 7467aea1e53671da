"""Seeded synthetic image datasets for desk-scale runs and tests."""

from __future__ import annotations

import numpy as np

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import ParameterError

from .dataset import LabeledDataset, Split

_SPLIT_STREAM = {"train": 0, "test": 1}


def _blob(height: int, width: int, cy: float, cx: float, radius: float) -> Array:
    yy, xx = np.mgrid[0:height, 0:width]
    return np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * radius**2))


def class_prototypes(
    classes: int, shape: tuple[int, int, int], seed: int, blobs: int = 3
) -> Array:
    """One [C, H, W] prototype per class: a sum of Gaussian blobs, peak 1."""
    channels, height, width = shape
    rng = np.random.default_rng(seed)
    prototypes = np.zeros((classes, channels, height, width))
    for c in range(classes):
        for ch in range(channels):
            for _ in range(blobs):
                cy, cx = rng.uniform(0, height - 1), rng.uniform(0, width - 1)
                radius = rng.uniform(0.12, 0.25) * min(height, width)
                prototypes[c, ch] += _blob(height, width, cy, cx, radius)
            prototypes[c, ch] /= prototypes[c, ch].max()
    return prototypes


def synth_dataset(
    classes: int,
    per_class: int,
    shape: tuple[int, int, int] = (1, 8, 8),
    seed: int = 0,
    split: Split = "train",
    noise: float = 0.1,
) -> LabeledDataset:
    """
    Class-conditional Gaussian-blob images.

    Train and test splits share class prototypes (drawn from `seed`) and
    differ only in per-sample noise, so a small classifier generalizes.
    Samples are interleaved by class (0, 1, ..., 0, 1, ...).

    Raises:
        ParameterError: for non-positive sizes.
    """
    if classes < 1 or per_class < 1 or min(shape) < 1:
        raise ParameterError(
            f"synthetic dataset needs positive sizes, got {classes}, {per_class}, {shape}"
        )
    prototypes = class_prototypes(classes, shape, seed)
    rng = np.random.default_rng([seed, _SPLIT_STREAM[split]])
    labels = np.tile(np.arange(classes, dtype=np.int64), per_class)
    brightness = rng.uniform(0.8, 1.0, size=(len(labels), 1, 1, 1))
    images = prototypes[labels] * brightness + noise * rng.standard_normal(
        (len(labels), *shape)
    )
    return LabeledDataset(
        np.clip(images, 0.0, 1.0).astype(np.float32),
        labels,
        classes,
        split,
        f"synth-{classes}x{per_class}",
    )


__all__ = ["synth_dataset", "class_prototypes"]
