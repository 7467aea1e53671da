"""
Desk-scale experiment checks. Opt in with `--run-slow`; the MNIST checks also
need `TRANSPOSE_KIT_MNIST_DIR`.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import polars as pl
import pytest

from transpose_kit.config import ExperimentConfig, parse_experiment
from transpose_kit.data import select_memorized, synth_dataset
from transpose_kit.detection import rates
from transpose_kit.experiments import (
    ablation_study,
    capacity_sweep,
    detection_study,
    prepare,
    seed_majority,
    train_prepared,
    with_seed,
)
from transpose_kit.extraction import extract_all, mse, retrain_utility
from transpose_kit.indexing import SpatialIndexer
from transpose_kit.nn import build_model, preset
from transpose_kit.stego import (
    StegoVariant,
    TransposeVariant,
    images_to_payload,
    noise_sweep,
    stego_embed,
)
from transpose_kit.training import (
    TrainConfig,
    accuracy,
    fine_tune_defense,
    secondary_mse,
    transpose_train,
)

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)


def _mnist(mnist_dir: Path, **sections: Any) -> ExperimentConfig:
    data: dict[str, Any] = {
        "name": "mnist-desk",
        "dataset": {
            "source": "mnist",
            "mnist_dir": str(mnist_dir),
            "train_limit": 10_000,
            "test_limit": 2_000,
        },
        "architecture": {"preset": "mnist_fc:width=512,depth=3"},
        "indexer": {"base": 3, "sequence": "gray", "embedding": "n_hot"},
        "train": {"epochs": 30, "learning_rate": 1e-3, "batch_primary": 64, "batch_secondary": 64},
        "memorize": {"total": 256},
        "detect": {"restarts": 20, "iterations": 300},
    }
    for key, value in sections.items():
        data[key] = {**data.get(key, {}), **value} if isinstance(value, dict) else value
    return parse_experiment(data, "desk-scale")


def test_toy_model_interpolates_its_memorized_set() -> None:
    train = synth_dataset(2, 8, (1, 8, 8), seed=0, split="train")
    indexer = SpatialIndexer.build(base=3, code_length=2)
    memorized = select_memorized(train, {0: 8, 1: 8}, indexer)
    specs, shape = preset("mnist_fc", width=64, depth=2, classes=2, image_shape=(1, 8, 8))
    model = build_model(specs, shape, seed=0)
    cfg = TrainConfig(epochs=500, learning_rate=5e-3, batch_primary=8, batch_secondary=8, early_stop_patience=500)
    transpose_train(model, train, memorized, cfg)
    assert secondary_mse(model, memorized) < 1e-3
    extracted = extract_all(model, indexer, memorized.counts())
    assert mse(extracted.images, memorized.images) < 1e-3


def test_memorization(mnist_dir: Path) -> None:
    cfg = _mnist(mnist_dir)
    checks = []
    for seed in SEEDS:
        prepared = prepare(with_seed(cfg, seed), data_seed=cfg.seed)
        train_prepared(prepared)
        checks.append(
            secondary_mse(prepared.model, prepared.memorized) <= 0.02
            and accuracy(prepared.model, prepared.test) >= 0.90
        )
    assert seed_majority(checks)


def test_more_memorized_samples_reconstruct_worse(mnist_dir: Path) -> None:
    frame = capacity_sweep(_mnist(mnist_dir), widths=[512], totals=[256, 1024], seeds=SEEDS)
    means = frame.group_by("memorized").agg(pl.col("secondary_mse").mean()).sort("memorized")
    small, large = means["secondary_mse"].to_list()
    assert large >= small


def test_extracted_samples_train_a_useful_classifier(mnist_dir: Path) -> None:
    cfg = _mnist(mnist_dir)
    prepared = prepare(cfg)
    train_prepared(prepared)
    extracted = extract_all(prepared.model, prepared.indexer, prepared.counts)
    specs, shape = preset("mnist_fc", width=256, depth=2, classes=10, image_shape=(1, 28, 28))
    retrain_cfg = TrainConfig(epochs=50, learning_rate=1e-3)
    stolen = retrain_utility(extracted.as_dataset(10), specs, shape, retrain_cfg, prepared.test)
    original = retrain_utility(
        prepared.memorized.as_dataset(10), specs, shape, retrain_cfg, prepared.test
    )
    assert original - stolen <= 0.05


def test_noise_destroys_stego_before_transposed_samples(mnist_dir: Path) -> None:
    cfg = _mnist(mnist_dir)
    prepared = prepare(cfg)
    train_prepared(prepared)
    payload, shapes = images_to_payload(prepared.train.images[:64])
    stego = []
    for name, kwargs in (
        ("lsb8", {"method": "lsb", "bits_per_param": 8}),
        ("last_bytes", {"method": "last_bytes"}),
        ("dead_kernel", {"method": "dead_kernel"}),
    ):
        carrier, manifest = stego_embed(prepared.model, payload, image_shapes=shapes, **kwargs)
        stego.append(StegoVariant(name, carrier, manifest, payload))
    transposed = [TransposeVariant("transposed", prepared.model, prepared.memorized)]
    frame = noise_sweep(stego, transposed, [0.0, 1e-6, 1e-5, 1e-4], prepared.test)

    clean = frame.filter((frame["sigma"] == 0.0) & (frame["kind"] == "transpose")).row(0, named=True)
    found = False
    for sigma in (1e-6, 1e-5, 1e-4):
        level = frame.filter(frame["sigma"] == sigma)
        carriers = level.filter(level["kind"] != "transpose")
        destroyed = all(
            row["bit_error_rate"] > 0.1 or (row["payload_ssim"] or 1.0) < 0.5
            for row in carriers.iter_rows(named=True)
        )
        model_row = level.filter(level["kind"] == "transpose").row(0, named=True)
        stable = (
            abs(model_row["extraction_mse"] - clean["extraction_mse"]) < 0.1 * clean["extraction_mse"]
            and clean["primary_accuracy"] - model_row["primary_accuracy"] < 0.01
        )
        found = found or (destroyed and stable)
    assert found


def test_detection_separates_transposed_models(mnist_dir: Path) -> None:
    cfg = _mnist(
        mnist_dir,
        architecture={"preset": "mnist_fc:width=256,depth=3"},
        train={"epochs": 10},
    )
    frame, auc, threshold = detection_study(cfg, seeds=tuple(range(5)))
    assert auc >= 0.95
    benign = frame.filter(frame["kind"] == "benign")["min_score"].to_list()
    malicious = frame.filter(frame["kind"] == "transposed")["min_score"].to_list()
    tpr, fpr = rates(benign, malicious, threshold)
    assert tpr == 1.0
    assert fpr <= 0.1


def test_fine_tuning_hurts_cnn_not_fc(mnist_dir: Path) -> None:
    cnn_cfg = _mnist(mnist_dir, architecture={"preset": "mnist_cnn:channels=16,depth=2"})
    fc_cfg = _mnist(mnist_dir)
    cnn_checks, fc_checks = [], []
    for seed in SEEDS:
        for cfg, checks in ((cnn_cfg, cnn_checks), (fc_cfg, fc_checks)):
            prepared = prepare(with_seed(cfg, seed), data_seed=cfg.seed)
            train_prepared(prepared)
            result = fine_tune_defense(
                prepared.model, prepared.train, prepared.memorized, 5, prepared.cfg.train
            )
            checks.append(result.ratio)
    assert seed_majority([ratio >= 5.0 for ratio in cnn_checks])
    assert seed_majority([abs(ratio - 1.0) < 0.5 for ratio in fc_checks])


def test_gray_with_class_embedding_beats_plain_counting(mnist_dir: Path) -> None:
    cfg = _mnist(mnist_dir, architecture={"preset": "mnist_cnn:channels=16,depth=2"})
    frame = ablation_study(
        cfg, schemes={"N": ("nary", "none"), "NG+n_hot": ("gray", "n_hot")}, seeds=SEEDS
    )
    by_seed = {
        seed: dict(zip(group["scheme"].to_list(), group["secondary_mse"].to_list(), strict=True))
        for (seed,), group in frame.group_by("seed")
    }
    assert seed_majority([scores["NG+n_hot"] < scores["N"] for scores in by_seed.values()])
    assert frame["secondary_mse"].is_finite().all()
