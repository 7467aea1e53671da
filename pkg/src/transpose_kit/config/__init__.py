from __future__ import annotations

from .experiment import (
    ArchitectureConfig,
    DatasetConfig,
    DefenseConfig,
    ExperimentConfig,
    MemorizeConfig,
    dump_experiment,
    load_experiment,
    parse_experiment,
)

__all__ = [
    "ArchitectureConfig",
    "DatasetConfig",
    "DefenseConfig",
    "ExperimentConfig",
    "MemorizeConfig",
    "dump_experiment",
    "load_experiment",
    "parse_experiment",
]
