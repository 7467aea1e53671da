"""Utility of an extracted dataset: train a fresh classifier on it."""

from __future__ import annotations

import math
from collections.abc import Sequence

from transpose_kit.data.dataset import LabeledDataset
from transpose_kit.errors import ParameterError
from transpose_kit.log import get_logger
from transpose_kit.nn.layers import LayerSpec, Shape
from transpose_kit.nn.model import build_model
from transpose_kit.training.evaluate import accuracy
from transpose_kit.training.report import TrainConfig
from transpose_kit.training.trainer import train_primary_only

logger = get_logger(__name__)


def retrain_utility(
    samples: LabeledDataset,
    arch: Sequence[LayerSpec],
    input_shape: Shape,
    cfg: TrainConfig,
    test: LabeledDataset,
) -> float:
    """
    Held-out accuracy of a classifier trained only on `samples`.

    Raises:
        ParameterError: for an empty sample set.
        DivergenceError: propagated from training.
    """
    if len(samples) == 0:
        raise ParameterError("cannot retrain on zero samples")
    model = build_model(arch, input_shape, seed=cfg.seed)
    train_primary_only(model, samples, cfg)
    score = accuracy(model, test)
    logger.info("Retrained classifier", extra={"samples": len(samples), "test_accuracy": score})
    return score


def exports_required(total_samples: int, per_export: int) -> int:
    """Model exports needed to carry `total_samples` when each holds `per_export`."""
    if per_export < 1:
        raise ParameterError(f"per-export capacity must be >= 1, got {per_export}")
    if total_samples < 0:
        raise ParameterError(f"sample count must be >= 0, got {total_samples}")
    return math.ceil(total_samples / per_export)


__all__ = ["retrain_utility", "exports_required"]
