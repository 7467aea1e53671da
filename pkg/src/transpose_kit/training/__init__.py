from __future__ import annotations

from .evaluate import accuracy, predict, reconstruct, secondary_mse
from .report import EpochRecord, TrainConfig, TrainReport
from .trainer import FineTuneResult, fine_tune_defense, train_primary_only, transpose_train

__all__ = [
    "TrainConfig",
    "TrainReport",
    "EpochRecord",
    "transpose_train",
    "train_primary_only",
    "fine_tune_defense",
    "FineTuneResult",
    "accuracy",
    "predict",
    "reconstruct",
    "secondary_mse",
]
