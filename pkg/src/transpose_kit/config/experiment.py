"""
Experiment configuration files.

An experiment file is YAML with one section per concern:

    name: mnist-fc
    seed: 0
    dataset: {source: synth, classes: 3, per_class: 100, shape: [1, 8, 8]}
    architecture: {preset: "mnist_fc:width=64,depth=2"}
    indexer: {base: 3, sequence: gray, embedding: n_hot}
    train: {lambda: 1.0, epochs: 50}
    memorize: {total: 30}
    detect: {restarts: 20, iterations: 300}
    defense: {fine_tune_epochs: 5}

Every section is validated before anything runs; unknown keys are errors.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any, Literal

import orjson
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from transpose_kit.data.dataset import LabeledDataset, balanced_counts
from transpose_kit.data.idx import load_mnist
from transpose_kit.data.synth import synth_dataset
from transpose_kit.detection.probe import DetectConfig
from transpose_kit.errors import ConfigError
from transpose_kit.indexing import IndexerConfig, SpatialIndexer
from transpose_kit.log import get_logger
from transpose_kit.nn.architectures import parse_preset, preset
from transpose_kit.nn.layers import LayerSpec, Shape
from transpose_kit.nn.model import Model, build_model
from transpose_kit.settings import RuntimeSettings
from transpose_kit.training.report import TrainConfig

logger = get_logger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class DatasetConfig(_Section):
    """
    Where the images come from.

    `synth` generates seeded Gaussian-blob classes; `mnist` reads the IDX
    files from `mnist_dir` (or `TRANSPOSE_KIT_MNIST_DIR`).
    """

    source: Literal["synth", "mnist"] = "synth"
    classes: int = Field(default=10, ge=1)
    per_class: int = Field(default=100, ge=1)
    test_per_class: int = Field(default=20, ge=1)
    shape: tuple[int, int, int] = (1, 8, 8)
    noise: float = Field(default=0.1, ge=0.0)
    mnist_dir: Path | None = None
    train_limit: int | None = Field(default=None, ge=1)
    test_limit: int | None = Field(default=None, ge=1)

    def load(self, seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
        """Return (train, test)."""
        if self.source == "synth":
            train = synth_dataset(self.classes, self.per_class, self.shape, seed, "train", self.noise)
            test = synth_dataset(
                self.classes, self.test_per_class, self.shape, seed, "test", self.noise
            )
        else:
            directory = self.mnist_dir or RuntimeSettings().mnist_dir
            if directory is None:
                raise ConfigError("dataset.source is mnist but no mnist_dir is configured")
            train, test = load_mnist(directory, "train"), load_mnist(directory, "test")
        if self.train_limit is not None:
            train = train.head(self.train_limit)
        if self.test_limit is not None:
            test = test.head(self.test_limit)
        return train, test


class ArchitectureConfig(_Section):
    """
    Either a preset string (`mnist_fc:width=512,depth=3`) or an explicit
    layer list. The preset's class count and image shape are taken from the
    dataset.
    """

    preset: str | None = "mnist_fc"
    layers: list[LayerSpec] | None = None
    image_activation: str = "sigmoid"

    @model_validator(mode="after")
    def _one_source(self) -> ArchitectureConfig:
        if self.layers is not None and self.preset is not None and "preset" in self.model_fields_set:
            raise ValueError("give either 'preset' or 'layers', not both")
        if self.layers is None and self.preset is None:
            raise ValueError("architecture needs 'preset' or 'layers'")
        return self

    def specs(self, classes: int, image_shape: Shape) -> tuple[list[LayerSpec], Shape]:
        if self.layers is not None:
            return list(self.layers), image_shape
        assert self.preset is not None
        name, options = parse_preset(self.preset)
        merged: dict[str, Any] = {"classes": classes, "image_shape": tuple(image_shape), **options}
        return preset(name, **merged)

    def build(self, classes: int, image_shape: Shape, seed: int) -> Model:
        layers, input_shape = self.specs(classes, image_shape)
        return build_model(layers, input_shape, seed, self.image_activation)


class MemorizeConfig(_Section):
    """Samples to memorize: `total` spread evenly, or explicit per-class `counts`."""

    total: int | None = Field(default=None, ge=0)
    counts: dict[int, int] | None = None

    @model_validator(mode="after")
    def _one_form(self) -> MemorizeConfig:
        if (self.total is None) == (self.counts is None):
            raise ValueError("memorize needs exactly one of 'total' or 'counts'")
        if self.counts is not None and any(v < 0 for v in self.counts.values()):
            raise ValueError("memorize counts must be nonnegative")
        return self

    def resolve(self, num_classes: int) -> dict[int, int]:
        if self.counts is not None:
            return dict(self.counts)
        return balanced_counts(num_classes, self.total or 0)


class DefenseConfig(_Section):
    fine_tune_epochs: int = Field(default=0, ge=0)
    noise_sigmas: list[float] = Field(default_factory=list)
    noise_mode: Literal["absolute", "relative"] = "absolute"
    weight_decays: list[float] = Field(default_factory=list)


class ExperimentConfig(_Section):
    name: str = "experiment"
    seed: int = 0
    output_dir: Path = Path("runs")
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    indexer: IndexerConfig = Field(default_factory=IndexerConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    memorize: MemorizeConfig = Field(default_factory=lambda: MemorizeConfig(total=0))
    detect: DetectConfig = Field(default_factory=DetectConfig)
    defense: DefenseConfig = Field(default_factory=DefenseConfig)

    def canonical(self) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True)

    def config_hash(self) -> str:
        """SHA-256 of the sorted-key JSON form; equal configs hash equal."""
        return hashlib.sha256(orjson.dumps(self.canonical(), option=orjson.OPT_SORT_KEYS)).hexdigest()

    def run_dir(self, settings: RuntimeSettings | None = None) -> Path:
        """`<output_dir>/<name>-<hash12>`; `TRANSPOSE_KIT_OUTPUT_DIR` beats the file."""
        settings = settings or RuntimeSettings()
        root = settings.output_dir if "output_dir" in settings.model_fields_set else self.output_dir
        return RuntimeSettings(output_dir=root).run_dir(self.name, self.config_hash())

    def indexer_for(self, model: Model) -> SpatialIndexer:
        """Indexer whose code length defaults to the transposed model's input size."""
        length = self.indexer.code_length
        if length is None:
            length = 1
            for dim in model.as_transposed().input_shape:
                length *= dim
        return SpatialIndexer(self.indexer, length)


def parse_experiment(data: dict[str, Any], source: str = "<dict>") -> ExperimentConfig:
    """
    Raises:
        ConfigError: listing every validation problem with its location.
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: {error['msg']}"
            for error in exc.errors()
        )
        raise ConfigError(f"{source}: {problems}") from exc


def load_experiment(path: Path) -> ExperimentConfig:
    """
    Read and validate an experiment YAML file.

    Raises:
        ConfigError: unreadable file, malformed YAML or a schema violation.
    """
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    cfg = parse_experiment(data, str(path))
    logger.debug("Loaded experiment config", extra={"path": str(path), "hash": cfg.config_hash()})
    return cfg


def dump_experiment(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.canonical(), sort_keys=True)


__all__ = [
    "DatasetConfig",
    "ArchitectureConfig",
    "MemorizeConfig",
    "DefenseConfig",
    "ExperimentConfig",
    "parse_experiment",
    "load_experiment",
    "dump_experiment",
]
