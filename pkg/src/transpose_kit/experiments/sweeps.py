"""
Parameter sweeps over whole training runs.

Each sweep trains one model per grid point and seed and returns a polars
DataFrame, one row per trained model.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np
import polars as pl

from transpose_kit.config.experiment import ArchitectureConfig, ExperimentConfig, MemorizeConfig
from transpose_kit.detection.auc import detection_auc
from transpose_kit.detection.probe import bim_probe, mean_image
from transpose_kit.detection.threshold import select_threshold
from transpose_kit.errors import ConfigError, ParameterError
from transpose_kit.indexing.indexer import EmbeddingScheme, Sequence_
from transpose_kit.log import get_logger
from transpose_kit.training.evaluate import accuracy, secondary_mse
from transpose_kit.training.trainer import fine_tune_defense

from .pipeline import Prepared, prepare, train_prepared, with_seed

logger = get_logger(__name__)

ABLATION_SCHEMES: dict[str, tuple[Sequence_, EmbeddingScheme]] = {
    "N": ("nary", "none"),
    "NG": ("gray", "none"),
    "NG+n_hot": ("gray", "n_hot"),
    "NG+random": ("gray", "random"),
}


def _require(values: Sequence[object], what: str) -> None:
    if len(values) == 0:
        raise ParameterError(f"{what} must not be empty")


def _trained(cfg: ExperimentConfig, seed: int, primary_only: bool = False) -> Prepared:
    prepared = prepare(with_seed(cfg, seed), data_seed=cfg.seed)
    train_prepared(prepared, primary_only)
    return prepared


def _scores(prepared: Prepared) -> dict[str, float]:
    return {
        "primary_accuracy": accuracy(prepared.model, prepared.test),
        "secondary_mse": secondary_mse(prepared.model, prepared.memorized),
    }


def with_preset_option(cfg: ExperimentConfig, key: str, value: int) -> ExperimentConfig:
    """Copy of `cfg` whose architecture preset has `key=value` set."""
    if cfg.architecture.preset is None or cfg.architecture.layers is not None:
        raise ConfigError("sweeps over architecture size need a preset architecture")
    name, _, options = cfg.architecture.preset.partition(":")
    kept = [item for item in options.split(",") if item and item.partition("=")[0] != key]
    text = f"{name}:{','.join([*kept, f'{key}={value}'])}"
    architecture = ArchitectureConfig(
        preset=text, image_activation=cfg.architecture.image_activation
    )
    return cfg.model_copy(update={"architecture": architecture})


def capacity_sweep(
    cfg: ExperimentConfig,
    widths: Sequence[int],
    totals: Sequence[int],
    seeds: Sequence[int] = (0,),
    width_option: str = "width",
) -> pl.DataFrame:
    """Secondary MSE and accuracy against model width and memorized sample count."""
    _require(widths, "widths")
    _require(totals, "totals")
    rows = []
    for width in widths:
        for total in totals:
            sized = with_preset_option(cfg, width_option, width).model_copy(
                update={"memorize": MemorizeConfig(total=total)}
            )
            for seed in seeds:
                prepared = _trained(sized, seed)
                rows.append(
                    {
                        "width": width,
                        "memorized": total,
                        "seed": seed,
                        "parameters": prepared.model.num_parameters(),
                        **_scores(prepared),
                    }
                )
                logger.info("Capacity point done", extra=rows[-1])
    return pl.DataFrame(
        rows,
        schema={
            "width": pl.Int64,
            "memorized": pl.Int64,
            "seed": pl.Int64,
            "parameters": pl.Int64,
            "primary_accuracy": pl.Float64,
            "secondary_mse": pl.Float64,
        },
        orient="row",
    )


def ablation_study(
    cfg: ExperimentConfig,
    schemes: Mapping[str, tuple[Sequence_, EmbeddingScheme]] = ABLATION_SCHEMES,
    seeds: Sequence[int] = (0,),
) -> pl.DataFrame:
    """Same budget, different indexing: plain n-ary, Gray, Gray plus class embeddings."""
    _require(list(schemes), "schemes")
    rows = []
    for name, (sequence, embedding) in schemes.items():
        indexer = cfg.indexer.model_copy(update={"sequence": sequence, "embedding": embedding})
        variant = cfg.model_copy(update={"indexer": indexer})
        for seed in seeds:
            prepared = _trained(variant, seed)
            rows.append({"scheme": name, "seed": seed, **_scores(prepared)})
            logger.info("Ablation point done", extra=rows[-1])
    return pl.DataFrame(
        rows,
        schema={
            "scheme": pl.String,
            "seed": pl.Int64,
            "primary_accuracy": pl.Float64,
            "secondary_mse": pl.Float64,
        },
        orient="row",
    )


def weight_decay_sweep(
    cfg: ExperimentConfig, decays: Sequence[float], seeds: Sequence[int] = (0,)
) -> pl.DataFrame:
    """Tandem training under AdamW at each decoupled weight-decay factor."""
    _require(decays, "decays")
    rows = []
    for decay in decays:
        train = cfg.train.model_copy(update={"optimizer": "adamw", "weight_decay": decay})
        variant = cfg.model_copy(update={"train": train})
        for seed in seeds:
            prepared = _trained(variant, seed)
            rows.append({"weight_decay": decay, "seed": seed, **_scores(prepared)})
            logger.info("Weight decay point done", extra=rows[-1])
    return pl.DataFrame(
        rows,
        schema={
            "weight_decay": pl.Float64,
            "seed": pl.Int64,
            "primary_accuracy": pl.Float64,
            "secondary_mse": pl.Float64,
        },
        orient="row",
    )


def fine_tune_table(
    cfg: ExperimentConfig, epochs: int = 5, seeds: Sequence[int] = (0,)
) -> pl.DataFrame:
    """Secondary MSE before and after primary-only fine-tuning of tandem-trained models."""
    rows = []
    for seed in seeds:
        prepared = _trained(cfg, seed)
        result = fine_tune_defense(
            prepared.model,
            prepared.train,
            prepared.memorized,
            epochs,
            prepared.cfg.train,
            prepared.test,
        )
        rows.append(
            {
                "seed": seed,
                "epochs": epochs,
                "mse_before": result.before,
                "mse_after": result.after,
                "ratio": result.ratio,
                "accuracy_before": result.accuracy_before,
                "accuracy_after": result.accuracy_after,
            }
        )
    return pl.DataFrame(
        rows,
        schema={
            "seed": pl.Int64,
            "epochs": pl.Int64,
            "mse_before": pl.Float64,
            "mse_after": pl.Float64,
            "ratio": pl.Float64,
            "accuracy_before": pl.Float64,
            "accuracy_after": pl.Float64,
        },
        orient="row",
    )


def detection_study(
    cfg: ExperimentConfig, seeds: Sequence[int] = tuple(range(5))
) -> tuple[pl.DataFrame, float, float]:
    """
    Train a benign (primary-only) and a transposed model per seed and probe each.

    Returns the per-model scores with verdicts under the automatic threshold,
    the detection AUC and the threshold itself.
    """
    _require(seeds, "seeds")
    reference = prepare(cfg)
    xbar = mean_image(reference.train, cfg.detect.mean_samples, cfg.seed)
    threshold = (
        select_threshold(xbar, cutoff=cfg.detect.ssim_cutoff, seed=cfg.seed).threshold
        if cfg.detect.threshold == "auto"
        else float(cfg.detect.threshold)
    )
    rows = []
    for seed in seeds:
        for kind, primary_only in (("benign", True), ("transposed", False)):
            prepared = _trained(cfg, seed, primary_only)
            score = bim_probe(prepared.model, xbar, cfg.detect).min_score
            rows.append(
                {"seed": seed, "kind": kind, "min_score": score, "flagged": score <= threshold}
            )
            logger.info("Probed model", extra=rows[-1])
    frame = pl.DataFrame(
        rows,
        schema={"seed": pl.Int64, "kind": pl.String, "min_score": pl.Float64, "flagged": pl.Boolean},
        orient="row",
    )
    scores = {
        kind: frame.filter(pl.col("kind") == kind)["min_score"].to_list()
        for kind in ("benign", "transposed")
    }
    auc = detection_auc(scores["benign"], scores["transposed"])
    logger.info("Detection study done", extra={"auc": auc, "threshold": threshold})
    return frame, auc, threshold


def seed_majority(values: Sequence[bool]) -> bool:
    """True when more than half of the per-seed checks hold."""
    return bool(np.sum(values) * 2 > len(values))


__all__ = [
    "ABLATION_SCHEMES",
    "capacity_sweep",
    "ablation_study",
    "weight_decay_sweep",
    "fine_tune_table",
    "detection_study",
    "with_preset_option",
    "seed_majority",
]
