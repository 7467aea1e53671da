from __future__ import annotations

from pathlib import Path

import orjson
import pytest

from transpose_kit.config import ExperimentConfig, load_experiment, parse_experiment
from transpose_kit.errors import ConfigError, ParameterError
from transpose_kit.experiments import (
    ABLATION_SCHEMES,
    CONFIG_FILE,
    MODEL_FILE,
    REPORT_FILE,
    ablation_study,
    capacity_sweep,
    detection_study,
    fine_tune_table,
    prepare,
    run_training,
    seed_majority,
    weight_decay_sweep,
    with_preset_option,
    with_seed,
)
from transpose_kit.io import read_model_file
from transpose_kit.settings import RuntimeSettings


@pytest.fixture
def tiny() -> ExperimentConfig:
    return parse_experiment(
        {
            "name": "tiny",
            "dataset": {"classes": 3, "per_class": 12, "test_per_class": 4, "shape": [1, 6, 6]},
            "architecture": {"preset": "mnist_fc:width=16,depth=1"},
            "train": {"epochs": 2, "batch_primary": 8, "batch_secondary": 4, "learning_rate": 0.005},
            "memorize": {"total": 6},
            "detect": {"restarts": 2, "iterations": 4},
        }
    )


def test_prepare(tiny: ExperimentConfig) -> None:
    prepared = prepare(tiny)
    assert len(prepared.train) == 36 and len(prepared.test) == 12
    assert prepared.counts == {0: 2, 1: 2, 2: 2}
    assert prepared.memorized.indices.shape == (6, 3)
    assert prepared.indexer.length == 3


def test_data_seed_is_independent_of_model_seed(tiny: ExperimentConfig) -> None:
    a = prepare(with_seed(tiny, 1), data_seed=0)
    b = prepare(with_seed(tiny, 2), data_seed=0)
    assert (a.train.images == b.train.images).all()
    assert not (a.model.params["layer1.weight"].data == b.model.params["layer1.weight"].data).all()
    assert with_seed(tiny, 5).train.seed == 5


def test_run_training_writes_artifacts(tiny: ExperimentConfig, tmp_path: Path) -> None:
    artifacts = run_training(tiny, settings=RuntimeSettings(output_dir=tmp_path))
    run_dir = artifacts.run_dir
    assert run_dir.parent == tmp_path
    assert run_dir.name == f"tiny-{tiny.config_hash()[:12]}"
    assert load_experiment(run_dir / CONFIG_FILE) == tiny
    lines = (run_dir / REPORT_FILE).read_bytes().splitlines()
    assert len(lines) == len(artifacts.report.epochs) + 1
    assert orjson.loads(lines[0])["epoch"] == 1
    stored = read_model_file(run_dir / MODEL_FILE)
    assert stored.metadata["config_hash"] == tiny.config_hash()
    assert stored.metadata["counts"] == {"0": 2, "1": 2, "2": 2}
    assert stored.metadata["num_classes"] == 3


def test_primary_only_run(tiny: ExperimentConfig, tmp_path: Path) -> None:
    artifacts = run_training(tiny, primary_only=True, settings=RuntimeSettings(output_dir=tmp_path))
    assert artifacts.report.mode == "primary_only"


def test_with_preset_option(tiny: ExperimentConfig) -> None:
    wider = with_preset_option(tiny, "width", 32)
    assert wider.architecture.preset == "mnist_fc:depth=1,width=32"
    explicit = tiny.model_copy(
        update={"architecture": tiny.architecture.model_copy(update={"preset": None, "layers": []})}
    )
    with pytest.raises(ConfigError):
        with_preset_option(explicit, "width", 32)


def test_capacity_sweep(tiny: ExperimentConfig) -> None:
    frame = capacity_sweep(tiny, widths=[8, 16], totals=[3, 6])
    assert frame.height == 4
    assert frame.columns == [
        "width",
        "memorized",
        "seed",
        "parameters",
        "primary_accuracy",
        "secondary_mse",
    ]
    small, large = frame.filter(frame["memorized"] == 3)["parameters"].to_list()
    assert small < large
    with pytest.raises(ParameterError):
        capacity_sweep(tiny, widths=[], totals=[3])


def test_ablation_study(tiny: ExperimentConfig) -> None:
    frame = ablation_study(tiny, seeds=[0])
    assert frame["scheme"].to_list() == list(ABLATION_SCHEMES)
    assert frame["secondary_mse"].min() >= 0.0


def test_weight_decay_sweep(tiny: ExperimentConfig) -> None:
    frame = weight_decay_sweep(tiny, [0.0, 0.1], seeds=[0, 1])
    assert frame.height == 4
    assert sorted(set(frame["weight_decay"].to_list())) == [0.0, 0.1]


def test_fine_tune_table(tiny: ExperimentConfig) -> None:
    frame = fine_tune_table(tiny, epochs=1, seeds=[0])
    row = frame.row(0, named=True)
    assert row["epochs"] == 1
    assert row["mse_before"] >= 0.0 and row["mse_after"] >= 0.0


def test_detection_study(tiny: ExperimentConfig) -> None:
    frame, auc, threshold = detection_study(tiny, seeds=[0, 1])
    assert frame.height == 4
    assert sorted(set(frame["kind"].to_list())) == ["benign", "transposed"]
    assert 0.0 <= auc <= 1.0
    assert threshold > 0.0


def test_seed_majority() -> None:
    assert seed_majority([True, True, False])
    assert not seed_majority([True, False])
    assert not seed_majority([])
