"""
The spatial indexer: I(i, c) = code(i) + E(c).

`code` is the reflected Gray code (or plain base-n digits) of the
within-class index, `E` a per-class offset that separates the regions
of different classes in the transposed model's input space.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from transpose_kit.autodiff.tensor import Array
from transpose_kit.errors import CapacityExceededError, ParameterError, SchemeCapacityError
from transpose_kit.log import get_logger

from .gray import gray_encode, nary_encode

logger = get_logger(__name__)

Sequence_ = Literal["gray", "nary"]
EmbeddingScheme = Literal["n_hot", "random", "none"]


class IndexerConfig(BaseModel):
    """
    Serializable indexer settings.

    Attributes:
        base: Code base n.
        code_length: Code length d; defaults to the transposed model's
            input dimension when left unset in an experiment file.
        sequence: "gray" (reflected n-ary Gray) or "nary" (plain counting).
        embedding: Class embedding scheme.
        seed: Seed of the random embedding table.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    base: int = Field(default=3, ge=2)
    code_length: int | None = Field(default=None, ge=1)
    sequence: Sequence_ = "gray"
    embedding: EmbeddingScheme = "n_hot"
    seed: int = 0


@dataclass(frozen=True, slots=True)
class IndexEntry:
    i: int
    label: int
    vector: Array


class SpatialIndexer:
    """Deterministic map from (within-class index, class) to an input vector."""

    def __init__(self, config: IndexerConfig, code_length: int | None = None) -> None:
        length = code_length or config.code_length
        if length is None:
            raise ParameterError("indexer needs a code length")
        self.config = config.model_copy(update={"code_length": length})
        self.base = config.base
        self.length: int = length
        self._embeddings: dict[int, Array] = {}

    @classmethod
    def build(
        cls,
        base: int = 3,
        code_length: int = 3,
        sequence: Sequence_ = "gray",
        embedding: EmbeddingScheme = "n_hot",
        seed: int = 0,
    ) -> SpatialIndexer:
        return cls(
            IndexerConfig(
                base=base,
                code_length=code_length,
                sequence=sequence,
                embedding=embedding,
                seed=seed,
            )
        )

    @cached_property
    def capacity(self) -> int:
        """Indices available per class (n^d)."""
        return int(self.base**self.length)

    def code(self, i: int) -> Array:
        encode = gray_encode if self.config.sequence == "gray" else nary_encode
        return encode(i, self.base, self.length)

    def class_embedding(self, label: int) -> Array:
        """
        E(c): n·e_c for "n_hot", a seeded N(0, n²I) draw for "random", zeros for "none".

        Raises:
            SchemeCapacityError: n_hot with a class id ≥ d.
        """
        cached = self._embeddings.get(label)
        if cached is not None:
            return cached
        scheme = self.config.embedding
        if scheme == "n_hot":
            if not 0 <= label < self.length:
                raise SchemeCapacityError(
                    f"n_hot embedding holds classes [0, {self.length}), got class {label}; "
                    "use the random scheme for more classes"
                )
            vector = np.zeros(self.length)
            vector[label] = self.base
        elif scheme == "random":
            rng = np.random.default_rng([self.config.seed, label])
            vector = self.base * rng.standard_normal(self.length)
        else:
            vector = np.zeros(self.length)
        vector.flags.writeable = False
        self._embeddings[label] = vector
        return vector

    def index(self, i: int, label: int) -> Array:
        """I(i, c) as a float64 vector of length d."""
        return self.code(i).astype(np.float64) + self.class_embedding(label)

    def enumerate(self, counts: Mapping[int, int]) -> list[IndexEntry]:
        """
        Every (i, c) pair for the given per-class counts.

        Classes ascend, then i ascends within a class.

        Raises:
            CapacityExceededError: naming the first class over capacity.
            ParameterError: for a negative count.
        """
        for label in sorted(counts):
            if counts[label] < 0:
                raise ParameterError(f"class {label} has a negative count {counts[label]}")
            if counts[label] > self.capacity:
                raise CapacityExceededError(
                    f"class {label} needs {counts[label]} indices, capacity is {self.capacity}"
                )
        entries = [
            IndexEntry(i, label, self.index(i, label))
            for label in sorted(counts)
            for i in range(counts[label])
        ]
        logger.debug("Enumerated indices", extra={"entries": len(entries), "classes": len(counts)})
        return entries

    def matrix(self, counts: Mapping[int, int]) -> tuple[Array, Array, Array]:
        """`enumerate` as arrays: (indices [N, d], within-class i [N], labels [N])."""
        entries = self.enumerate(counts)
        if not entries:
            return np.zeros((0, self.length)), np.zeros(0, np.int64), np.zeros(0, np.int64)
        return (
            np.stack([e.vector for e in entries]),
            np.array([e.i for e in entries], dtype=np.int64),
            np.array([e.label for e in entries], dtype=np.int64),
        )


__all__ = ["IndexerConfig", "IndexEntry", "SpatialIndexer", "EmbeddingScheme"]
