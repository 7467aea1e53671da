from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest

from transpose_kit.data import LabeledDataset, MemorizationSet, select_memorized, synth_dataset
from transpose_kit.indexing import SpatialIndexer
from transpose_kit.nn import LayerSpec, Model, build_model
from transpose_kit.training import TrainConfig, transpose_train

IMAGE_SHAPE = (1, 6, 6)


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--run-slow", action="store_true", help="run desk-scale experiment checks")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--run-slow"):
        return
    skip = pytest.mark.skip(reason="slow; pass --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def mnist_dir() -> Path:
    """MNIST IDX directory from TRANSPOSE_KIT_MNIST_DIR; skips when unset."""
    value = os.environ.get("TRANSPOSE_KIT_MNIST_DIR")
    if not value or not Path(value).is_dir():
        pytest.skip("TRANSPOSE_KIT_MNIST_DIR is not set")
    return Path(value)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def fc_specs() -> list[LayerSpec]:
    return [
        LayerSpec(kind="flatten"),
        LayerSpec(kind="linear", units=16, activation="relu"),
        LayerSpec(kind="linear", units=3),
    ]


@pytest.fixture
def fc_model(fc_specs: list[LayerSpec]) -> Model:
    return build_model(fc_specs, IMAGE_SHAPE, seed=0)


@pytest.fixture(scope="session")
def train_set() -> LabeledDataset:
    return synth_dataset(3, 30, IMAGE_SHAPE, seed=0, split="train")


@pytest.fixture(scope="session")
def test_set() -> LabeledDataset:
    return synth_dataset(3, 10, IMAGE_SHAPE, seed=0, split="test")


@pytest.fixture(scope="session")
def indexer() -> SpatialIndexer:
    return SpatialIndexer.build(base=3, code_length=3, sequence="gray", embedding="n_hot")


@pytest.fixture(scope="session")
def memorized(train_set: LabeledDataset, indexer: SpatialIndexer) -> MemorizationSet:
    return select_memorized(train_set, {0: 4, 1: 4, 2: 4}, indexer)


@pytest.fixture(scope="session")
def trained(
    train_set: LabeledDataset, test_set: LabeledDataset, memorized: MemorizationSet
) -> Model:
    """A small tandem-trained FC model; tests must clone before mutating it."""
    specs = [
        LayerSpec(kind="flatten"),
        LayerSpec(kind="linear", units=64, activation="relu"),
        LayerSpec(kind="linear", units=64, activation="relu"),
        LayerSpec(kind="linear", units=3),
    ]
    model = build_model(specs, IMAGE_SHAPE, seed=0)
    cfg = TrainConfig(epochs=100, learning_rate=5e-3, batch_primary=16, batch_secondary=12)
    transpose_train(model, train_set, memorized, cfg, test_set)
    return model
