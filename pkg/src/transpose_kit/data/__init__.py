from __future__ import annotations

from .dataset import (
    LabeledDataset,
    MemorizationSet,
    Split,
    balanced_counts,
    dataset_mean,
    select_memorized,
)
from .idx import load_idx, load_mnist
from .synth import synth_dataset

__all__ = [
    "LabeledDataset",
    "MemorizationSet",
    "Split",
    "balanced_counts",
    "dataset_mean",
    "select_memorized",
    "load_idx",
    "load_mnist",
    "synth_dataset",
]
