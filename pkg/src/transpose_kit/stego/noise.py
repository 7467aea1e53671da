"""Gaussian parameter noise and the robustness sweep built on it."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np
import polars as pl

from transpose_kit.autodiff.tensor import Array
from transpose_kit.data.dataset import LabeledDataset, MemorizationSet
from transpose_kit.errors import ParameterError
from transpose_kit.extraction.metrics import mse, ssim_batch
from transpose_kit.log import get_logger
from transpose_kit.nn.model import Model
from transpose_kit.training.evaluate import accuracy, reconstruct

from .embed import StegoManifest, bit_error_rate, payload_to_images, stego_extract

logger = get_logger(__name__)

NoiseMode = Literal["absolute", "relative"]


def add_param_noise(
    model: Model, sigma: float, seed: int = 0, mode: NoiseMode = "absolute"
) -> Model:
    """
    Copy of `model` with N(0, σ²) added to every parameter.

    In "relative" mode σ is multiplied by each parameter tensor's standard
    deviation. σ=0 returns a bit-identical copy.

    Raises:
        ParameterError: for a negative σ.
    """
    if sigma < 0:
        raise ParameterError(f"noise sigma must be >= 0, got {sigma}")
    noisy = model.clone()
    if sigma == 0:
        return noisy
    rng = np.random.default_rng(seed)
    for tensor in noisy.params.values():
        scale = sigma * (float(np.std(tensor.data)) if mode == "relative" else 1.0)
        draw = rng.standard_normal(tensor.shape) * scale
        tensor.data[...] = (tensor.data.astype(np.float64) + draw).astype(np.float32)
    return noisy


@dataclass(frozen=True)
class StegoVariant:
    """A carrier model plus the manifest and images it hides."""

    name: str
    model: Model
    manifest: StegoManifest
    payload: bytes


@dataclass(frozen=True)
class TransposeVariant:
    name: str
    model: Model
    memorized: MemorizationSet


NOISE_SWEEP_COLUMNS = [
    "sigma",
    "seed",
    "model",
    "kind",
    "primary_accuracy",
    "bit_error_rate",
    "payload_ssim",
    "extraction_mse",
    "extraction_ssim",
]


def _stego_row(variant: StegoVariant, noisy: Model) -> dict[str, float | None]:
    received = stego_extract(noisy, variant.manifest)
    row: dict[str, float | None] = {"bit_error_rate": bit_error_rate(variant.payload, received)}
    shapes = variant.manifest.image_shapes
    if shapes:
        sent_images = payload_to_images(variant.payload, shapes)
        got_images = payload_to_images(received, shapes)
        row["payload_ssim"] = float(np.mean(ssim_batch(got_images, sent_images)))
    return row


def _transpose_row(variant: TransposeVariant, noisy: Model) -> dict[str, float | None]:
    images = reconstruct(noisy, variant.memorized.indices)
    images = np.nan_to_num(images, nan=0.0)
    return {
        "extraction_mse": mse(images, variant.memorized.images),
        "extraction_ssim": float(np.mean(ssim_batch(images, variant.memorized.images))),
    }


def noise_sweep(
    stego: Sequence[StegoVariant],
    transpose: Sequence[TransposeVariant],
    sigmas: Sequence[float],
    test: LabeledDataset,
    seeds: Sequence[int] = (0,),
    mode: NoiseMode = "absolute",
) -> pl.DataFrame:
    """
    Evaluate every variant at every σ (and seed).

    Rows carry primary accuracy for all variants, bit error rate and payload
    SSIM for stego carriers, and extraction MSE/SSIM for transposed models.

    Raises:
        ParameterError: if σ values are not strictly increasing or either
            variant list is empty.
    """
    if not stego or not transpose:
        raise ParameterError("noise sweep needs at least one stego and one transpose model")
    grid: Array = np.asarray(sigmas, dtype=np.float64)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ParameterError(f"sigmas must be strictly increasing, got {list(sigmas)}")

    rows: list[dict[str, object]] = []
    for sigma in grid.tolist():
        for seed in seeds:
            for variant in stego:
                noisy = add_param_noise(variant.model, sigma, seed, mode)
                rows.append(
                    {
                        "sigma": sigma,
                        "seed": seed,
                        "model": variant.name,
                        "kind": variant.manifest.method,
                        "primary_accuracy": accuracy(noisy, test),
                        **_stego_row(variant, noisy),
                    }
                )
            for tvariant in transpose:
                noisy = add_param_noise(tvariant.model, sigma, seed, mode)
                rows.append(
                    {
                        "sigma": sigma,
                        "seed": seed,
                        "model": tvariant.name,
                        "kind": "transpose",
                        "primary_accuracy": accuracy(noisy, test),
                        **_transpose_row(tvariant, noisy),
                    }
                )
        logger.info("Noise level evaluated", extra={"sigma": sigma, "rows": len(rows)})

    schema = {
        "sigma": pl.Float64,
        "seed": pl.Int64,
        "model": pl.String,
        "kind": pl.String,
        "primary_accuracy": pl.Float64,
        "bit_error_rate": pl.Float64,
        "payload_ssim": pl.Float64,
        "extraction_mse": pl.Float64,
        "extraction_ssim": pl.Float64,
    }
    return pl.DataFrame(
        {column: [row.get(column) for row in rows] for column in NOISE_SWEEP_COLUMNS},
        schema=schema,
    )


__all__ = [
    "NoiseMode",
    "add_param_noise",
    "StegoVariant",
    "TransposeVariant",
    "noise_sweep",
    "NOISE_SWEEP_COLUMNS",
]
