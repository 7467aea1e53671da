"""
On-disk layout of an extracted dataset:

    <dir>/manifest.csv      class, index, filename, source_hash
    <dir>/meta.json         image shape and indexer configuration
    <dir>/images/*.f32      one raw little-endian float32 image per file
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import orjson
import polars as pl

from transpose_kit.errors import DataError
from transpose_kit.log import get_logger

from .extract import ExtractedDataset

logger = get_logger(__name__)

MANIFEST = "manifest.csv"
META = "meta.json"


def save_extracted(extracted: ExtractedDataset, directory: Path) -> Path:
    images_dir = directory / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    filenames = []
    for image, label, position in zip(
        extracted.images, extracted.labels, extracted.positions, strict=True
    ):
        name = f"c{int(label):03d}_i{int(position):06d}.f32"
        (images_dir / name).write_bytes(np.ascontiguousarray(image, dtype="<f4").tobytes())
        filenames.append(f"images/{name}")
    pl.DataFrame(
        {
            "class": extracted.labels.astype(np.int64),
            "index": extracted.positions.astype(np.int64),
            "filename": filenames,
            "source_hash": [extracted.source_digest] * len(filenames),
        },
        schema={"class": pl.Int64, "index": pl.Int64, "filename": pl.String, "source_hash": pl.String},
    ).write_csv(directory / MANIFEST)
    shape = list(extracted.images.shape[1:])
    (directory / META).write_bytes(
        orjson.dumps(
            {"shape": shape, "indexer": extracted.indexer, "source_hash": extracted.source_digest},
            option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2,
        )
    )
    logger.info("Saved extracted dataset", extra={"path": str(directory), "samples": len(filenames)})
    return directory


def load_extracted(directory: Path) -> ExtractedDataset:
    """
    Raises:
        DataError: missing manifest/meta or an image file of the wrong size.
    """
    manifest_path, meta_path = directory / MANIFEST, directory / META
    if not manifest_path.exists() or not meta_path.exists():
        raise DataError(f"{directory} is not an extracted dataset (missing {MANIFEST} or {META})")
    meta = orjson.loads(meta_path.read_bytes())
    shape = tuple(meta["shape"])
    manifest = pl.read_csv(
        manifest_path,
        schema={"class": pl.Int64, "index": pl.Int64, "filename": pl.String, "source_hash": pl.String},
    )
    count = int(np.prod(shape))
    images = np.zeros((manifest.height, *shape), dtype=np.float32)
    for row, filename in enumerate(manifest["filename"]):
        raw = (directory / filename).read_bytes()
        if len(raw) != 4 * count:
            raise DataError(f"{filename}: expected {4 * count} bytes, found {len(raw)}")
        images[row] = np.frombuffer(raw, dtype="<f4").reshape(shape)
    return ExtractedDataset(
        images,
        manifest["class"].to_numpy(),
        manifest["index"].to_numpy(),
        meta.get("source_hash", ""),
        meta.get("indexer", {}),
    )


__all__ = ["save_extracted", "load_extracted"]
