"""Batched, gradient-free evaluation helpers."""

from __future__ import annotations

import numpy as np

from transpose_kit.autodiff.tensor import Array, Tensor, no_grad
from transpose_kit.data.dataset import LabeledDataset, MemorizationSet
from transpose_kit.nn.model import Model


def predict(model: Model, inputs: Array, batch_size: int = 256) -> Array:
    """Run `model` over `inputs` in batches and stack the outputs."""
    outputs = []
    with no_grad():
        for start in range(0, len(inputs), batch_size):
            outputs.append(model(Tensor(inputs[start : start + batch_size])).data)
    if not outputs:
        return np.zeros((0, *model.output_shape), dtype=np.float32)
    return np.concatenate(outputs)


def accuracy(model: Model, dataset: LabeledDataset, batch_size: int = 256) -> float:
    if len(dataset) == 0:
        return 0.0
    logits = predict(model.as_forward(), dataset.images, batch_size)
    return float(np.mean(logits.argmax(axis=1) == dataset.labels))


def reconstruct(
    model: Model, indices: Array, batch_size: int = 256, clamp: bool = True
) -> Array:
    """Images the transposed view produces for a stack of index vectors."""
    images = predict(model.as_transposed(), indices, batch_size)
    return np.clip(images, 0.0, 1.0) if clamp else images


def secondary_mse(model: Model, memorized: MemorizationSet, clamp: bool = False) -> float:
    """Mean squared error between reconstructions and the memorized images."""
    if len(memorized) == 0:
        return 0.0
    images = reconstruct(model, memorized.indices, clamp=clamp)
    diff = images.astype(np.float64) - memorized.images.astype(np.float64)
    return float(np.mean(diff * diff))


__all__ = ["predict", "accuracy", "reconstruct", "secondary_mse"]
