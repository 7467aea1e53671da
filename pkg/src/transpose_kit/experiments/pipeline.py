"""
Turn an `ExperimentConfig` into datasets, a model, an indexer and a
memorization set, train it, and lay the artifacts out in a run directory:

    <run_dir>/config.yaml
    <run_dir>/model.tpsm
    <run_dir>/train_report.jsonl
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from transpose_kit.config.experiment import ExperimentConfig, dump_experiment
from transpose_kit.data.dataset import LabeledDataset, MemorizationSet, select_memorized
from transpose_kit.indexing import SpatialIndexer
from transpose_kit.io.modelfile import save_model
from transpose_kit.log import SUCCESS, get_logger
from transpose_kit.nn.model import Model
from transpose_kit.settings import RuntimeSettings
from transpose_kit.training.report import TrainReport
from transpose_kit.training.trainer import train_primary_only, transpose_train

logger = get_logger(__name__)

MODEL_FILE = "model.tpsm"
REPORT_FILE = "train_report.jsonl"
CONFIG_FILE = "config.yaml"


@dataclass(frozen=True, eq=False)
class Prepared:
    cfg: ExperimentConfig
    train: LabeledDataset
    test: LabeledDataset
    model: Model
    indexer: SpatialIndexer
    counts: dict[int, int]
    memorized: MemorizationSet


@dataclass(frozen=True, eq=False)
class RunArtifacts:
    run_dir: Path
    model_path: Path
    report: TrainReport
    prepared: Prepared


def with_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Same experiment with model initialization and batch order seeded by `seed`."""
    return cfg.model_copy(
        update={"seed": seed, "train": cfg.train.model_copy(update={"seed": seed})}
    )


def prepare(cfg: ExperimentConfig, data_seed: int | None = None) -> Prepared:
    """
    Build everything a run needs.

    The dataset is drawn from `data_seed` (defaults to `cfg.seed`) so seed
    sweeps can keep the data fixed while varying the model.
    """
    train, test = cfg.dataset.load(cfg.seed if data_seed is None else data_seed)
    model = cfg.architecture.build(train.num_classes, train.sample_shape, cfg.seed)
    indexer = cfg.indexer_for(model)
    counts = cfg.memorize.resolve(train.num_classes)
    memorized = select_memorized(train, counts, indexer)
    return Prepared(cfg, train, test, model, indexer, counts, memorized)


def train_prepared(prepared: Prepared, primary_only: bool = False) -> TrainReport:
    if primary_only:
        monitored = prepared.memorized if len(prepared.memorized) else None
        return train_primary_only(
            prepared.model, prepared.train, prepared.cfg.train, prepared.test, monitored
        )
    return transpose_train(
        prepared.model, prepared.train, prepared.memorized, prepared.cfg.train, prepared.test
    )


def model_metadata(prepared: Prepared) -> dict[str, object]:
    return {
        "config_hash": prepared.cfg.config_hash(),
        "counts": {str(k): v for k, v in sorted(prepared.counts.items())},
        "indexer": prepared.indexer.config.model_dump(mode="json"),
        "num_classes": prepared.train.num_classes,
    }


def run_training(
    cfg: ExperimentConfig,
    primary_only: bool = False,
    settings: RuntimeSettings | None = None,
) -> RunArtifacts:
    """Train one experiment and write its run directory."""
    run_dir = cfg.run_dir(settings)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / CONFIG_FILE).write_text(dump_experiment(cfg), encoding="utf-8")

    prepared = prepare(cfg)
    logger.info(
        "Starting run",
        extra={
            "run_dir": str(run_dir),
            "parameters": prepared.model.num_parameters(),
            "memorized": len(prepared.memorized),
            "primary_only": primary_only,
        },
    )
    report = train_prepared(prepared, primary_only)
    report.write_jsonl(run_dir / REPORT_FILE)
    model_path = run_dir / MODEL_FILE
    save_model(prepared.model, model_path, model_metadata(prepared))
    logger.log(SUCCESS, "Run saved", extra={"run_dir": str(run_dir)})
    return RunArtifacts(run_dir, model_path, report, prepared)


__all__ = [
    "Prepared",
    "RunArtifacts",
    "prepare",
    "train_prepared",
    "run_training",
    "with_seed",
    "model_metadata",
    "MODEL_FILE",
    "REPORT_FILE",
    "CONFIG_FILE",
]
