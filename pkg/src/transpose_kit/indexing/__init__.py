from __future__ import annotations

from .gray import gray_decode, gray_encode, gray_sequence, nary_encode
from .indexer import IndexEntry, IndexerConfig, SpatialIndexer

__all__ = [
    "gray_encode",
    "gray_decode",
    "gray_sequence",
    "nary_encode",
    "IndexEntry",
    "IndexerConfig",
    "SpatialIndexer",
]
