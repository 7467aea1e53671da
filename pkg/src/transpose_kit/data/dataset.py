"""Labeled image datasets and the memorization subsets drawn from them."""

from __future__ import annotations

from collections import Counter
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import DataError, ParameterError
from transpose_kit.indexing import SpatialIndexer

Split = Literal["train", "test"]


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Images in [0, 1] with integer class labels.

    Attributes:
        images: float32 array `[m, C, H, W]`.
        labels: int64 array `[m]`.
        num_classes: Number of classes of the task (labels are below it).
        split: "train" or "test".
    """

    images: Array
    labels: Array
    num_classes: int
    split: Split = "train"
    name: str = field(default="dataset", compare=False)

    def __post_init__(self) -> None:
        if self.images.ndim != 4:
            raise DataError(f"images must be [m, C, H, W], got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise DataError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DataError("pixel values must lie in [0, 1]")
        self.images.flags.writeable = False
        self.labels.flags.writeable = False

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> tuple[int, int, int]:
        c, h, w = self.images.shape[1:]
        return c, h, w

    def class_counts(self) -> dict[int, int]:
        counts = Counter(int(label) for label in self.labels)
        return {label: counts[label] for label in sorted(counts)}

    def subset(self, indices: Array) -> LabeledDataset:
        return LabeledDataset(
            self.images[indices].copy(),
            self.labels[indices].copy(),
            self.num_classes,
            self.split,
            self.name,
        )

    def head(self, count: int) -> LabeledDataset:
        return self.subset(np.arange(min(count, len(self))))

    def batches(
        self, batch_size: int, rng: np.random.Generator | None = None
    ) -> Iterator[tuple[Array, Array]]:
        """Mini-batches over one pass; shuffled when `rng` is given."""
        if batch_size < 1:
            raise ParameterError(f"batch size must be >= 1, got {batch_size}")
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(self), batch_size):
            chosen = order[start : start + batch_size]
            yield self.images[chosen], self.labels[chosen]


@dataclass(frozen=True, eq=False)
class MemorizationSet:
    """
    Samples the transposed model learns to reproduce, with their index vectors.

    Rows follow `SpatialIndexer.enumerate` order: classes ascending, then
    within-class index ascending.
    """

    images: Array
    labels: Array
    positions: Array
    indices: Array

    def __len__(self) -> int:
        return len(self.labels)

    def counts(self) -> dict[int, int]:
        found = Counter(int(label) for label in self.labels)
        return {label: found[label] for label in sorted(found)}

    def as_dataset(self, num_classes: int) -> LabeledDataset:
        return LabeledDataset(self.images, self.labels, num_classes, "train", "memorized")


def balanced_counts(num_classes: int, total: int) -> dict[int, int]:
    """Spread `total` samples over the classes, earlier classes taking the remainder."""
    base, extra = divmod(total, num_classes)
    return {c: base + (1 if c < extra else 0) for c in range(num_classes) if base or c < extra}


def select_memorized(
    dataset: LabeledDataset, counts: Mapping[int, int], indexer: SpatialIndexer
) -> MemorizationSet:
    """
    Take the first `counts[c]` samples of each class in dataset order.

    Raises:
        DataError: if a class has fewer samples than requested.
        CapacityExceededError: propagated from the indexer.
    """
    entries = indexer.enumerate(counts)
    rows: list[int] = []
    for label in sorted(counts):
        members = np.flatnonzero(dataset.labels == label)
        if len(members) < counts[label]:
            raise DataError(
                f"class {label} has {len(members)} samples, {counts[label]} requested"
            )
        rows.extend(members[: counts[label]].tolist())
    picked = np.asarray(rows, dtype=np.int64)
    if not entries:
        shape = (0, *dataset.sample_shape)
        return MemorizationSet(
            np.zeros(shape, np.float32),
            np.zeros(0, np.int64),
            np.zeros(0, np.int64),
            np.zeros((0, indexer.length)),
        )
    return MemorizationSet(
        images=dataset.images[picked].copy(),
        labels=np.array([e.label for e in entries], dtype=np.int64),
        positions=np.array([e.i for e in entries], dtype=np.int64),
        indices=np.stack([e.vector for e in entries]),
    )


def dataset_mean(images: Array) -> Array:
    """
    Elementwise mean image over the first axis.

    Raises:
        ParameterError: for an empty image stack.
    """
    if len(images) == 0:
        raise ParameterError("cannot average an empty dataset")
    return images.mean(axis=0, dtype=np.float64).astype(np.float32)


__all__ = [
    "LabeledDataset",
    "MemorizationSet",
    "Split",
    "balanced_counts",
    "select_memorized",
    "dataset_mean",
]
