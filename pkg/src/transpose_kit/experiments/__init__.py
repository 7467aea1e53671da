from __future__ import annotations

from .pipeline import (
    CONFIG_FILE,
    MODEL_FILE,
    REPORT_FILE,
    Prepared,
    RunArtifacts,
    model_metadata,
    prepare,
    run_training,
    train_prepared,
    with_seed,
)
from .sweeps import (
    ABLATION_SCHEMES,
    ablation_study,
    capacity_sweep,
    detection_study,
    fine_tune_table,
    seed_majority,
    weight_decay_sweep,
    with_preset_option,
)

__all__ = [
    "CONFIG_FILE",
    "MODEL_FILE",
    "REPORT_FILE",
    "model_metadata",
    "seed_majority",
    "with_preset_option",
    "Prepared",
    "RunArtifacts",
    "prepare",
    "run_training",
    "train_prepared",
    "with_seed",
    "ABLATION_SCHEMES",
    "ablation_study",
    "capacity_sweep",
    "detection_study",
    "fine_tune_table",
    "weight_decay_sweep",
]
