"""
Systematic retrieval of memorized samples and extraction quality reports.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import polars as pl
from pydantic import BaseModel, Field

from transpose_kit.autodiff.tensor import Array
from transpose_kit.data.dataset import LabeledDataset
from transpose_kit.errors import DataError
from transpose_kit.indexing import SpatialIndexer
from transpose_kit.io.modelfile import model_digest
from transpose_kit.log import get_logger
from transpose_kit.nn.model import Model
from transpose_kit.training.evaluate import predict, reconstruct

from .metrics import per_sample_mse, ssim_batch

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ExtractedDataset:
    """
    Images retrieved from a transposed model, in enumerate order.

    Attributes:
        images: float32 `[N, C, H, W]`, clamped to [0, 1].
        labels: Class of each image.
        positions: Within-class index i of each image.
        source_digest: Content hash of the model they came from.
        indexer: Indexer configuration used for retrieval.
    """

    images: Array
    labels: Array
    positions: Array
    source_digest: str = ""
    indexer: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def counts(self) -> dict[int, int]:
        labels, counts = np.unique(self.labels, return_counts=True)
        return {int(label): int(count) for label, count in zip(labels, counts, strict=True)}

    def as_dataset(self, num_classes: int) -> LabeledDataset:
        return LabeledDataset(self.images, self.labels, num_classes, "train", "extracted")


def extract_all(
    model: Model, indexer: SpatialIndexer, counts: Mapping[int, int], batch_size: int = 256
) -> ExtractedDataset:
    """
    Query the transposed model at I(i, c) for every (i, c) in enumerate order.

    Raises:
        CapacityExceededError: propagated from the indexer.
        DimensionError: if the index length does not match the model.
    """
    indices, positions, labels = indexer.matrix(counts)
    transposed = model.as_transposed()
    if len(indices):
        images = reconstruct(transposed, indices, batch_size).astype(np.float32)
    else:
        images = np.zeros((0, *transposed.output_shape), dtype=np.float32)
    logger.info("Extracted samples", extra={"samples": len(labels), "classes": len(counts)})
    return ExtractedDataset(
        images,
        labels,
        positions,
        model_digest(model.as_forward()),
        indexer.config.model_dump(),
    )


def feature_accuracy(aux: Model, images: Array, true_labels: Array) -> float:
    """
    Fraction of `images` the auxiliary classifier assigns their true label.

    Raises:
        DataError: if images and labels disagree in count.
    """
    if len(images) != len(true_labels):
        raise DataError(f"{len(images)} images but {len(true_labels)} labels")
    if len(images) == 0:
        return 0.0
    logits = predict(aux.as_forward(), images)
    return float(np.mean(logits.argmax(axis=1) == true_labels))


class QualityReport(BaseModel):
    mean_mse: float = Field(ge=0.0)
    mean_ssim: float = Field(ge=-1.0, le=1.0)
    feature_accuracy: float | None = Field(default=None, ge=0.0, le=1.0)
    samples: int
    per_class: list[dict[str, float]] = Field(default_factory=list)

    def per_class_frame(self) -> pl.DataFrame:
        return pl.DataFrame(self.per_class)


def quality_report(
    extracted: ExtractedDataset, reference: Array, aux: Model | None = None
) -> QualityReport:
    """
    Compare extracted images to the originals they should reproduce.

    `reference` must be aligned with `extracted` (same enumerate order).
    """
    if extracted.images.shape != reference.shape:
        raise DataError(
            f"extracted {extracted.images.shape} and reference {reference.shape} differ"
        )
    errors = per_sample_mse(extracted.images, reference)
    similarity = ssim_batch(extracted.images, reference)
    agreement = (
        feature_accuracy(aux, extracted.images, extracted.labels) if aux is not None else None
    )
    frame = pl.DataFrame(
        {"class": extracted.labels, "mse": errors, "ssim": similarity}
    )
    per_class = (
        frame.group_by("class")
        .agg(pl.len().alias("samples"), pl.col("mse").mean(), pl.col("ssim").mean())
        .sort("class")
        .to_dicts()
    )
    return QualityReport(
        mean_mse=float(errors.mean()) if len(errors) else 0.0,
        mean_ssim=float(similarity.mean()) if len(similarity) else 1.0,
        feature_accuracy=agreement,
        samples=len(extracted),
        per_class=per_class,
    )


__all__ = ["ExtractedDataset", "QualityReport", "extract_all", "feature_accuracy", "quality_report"]
