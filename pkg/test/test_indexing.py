from __future__ import annotations

import itertools

import numpy as np
import pytest

from transpose_kit.errors import CapacityExceededError, ParameterError, SchemeCapacityError
from transpose_kit.indexing import (
    IndexerConfig,
    SpatialIndexer,
    gray_decode,
    gray_encode,
    gray_sequence,
    nary_encode,
)


def test_binary_example_codes() -> None:
    assert "".join(map(str, gray_encode(15, 2, 5))) == "01000"
    assert "".join(map(str, gray_encode(16, 2, 5))) == "11000"


@pytest.mark.parametrize("base", [2, 3, 4])
@pytest.mark.parametrize("length", range(1, 7))
def test_gray_is_a_unit_step_bijection(base: int, length: int) -> None:
    codes = list(gray_sequence(base, length))
    assert len({tuple(c) for c in codes}) == base**length
    for previous, current in itertools.pairwise(codes):
        diff = np.abs(current - previous)
        assert diff.sum() == 1
    for i, code in enumerate(codes):
        assert gray_decode(code, base) == i


def test_first_codes_ternary() -> None:
    expected = ["00", "01", "02", "12", "11", "10", "20", "21", "22"]
    assert ["".join(map(str, c)) for c in gray_sequence(3, 2)] == expected


def test_nary_is_plain_counting() -> None:
    np.testing.assert_array_equal(nary_encode(5, 3, 3), [0, 1, 2])


def test_capacity_and_parameter_errors() -> None:
    with pytest.raises(CapacityExceededError):
        gray_encode(9, 3, 2)
    with pytest.raises(CapacityExceededError):
        gray_encode(-1, 3, 2)
    with pytest.raises(ParameterError):
        gray_encode(0, 1, 2)
    with pytest.raises(ParameterError):
        gray_decode([0, 3], 3)


def test_index_is_code_plus_n_hot() -> None:
    indexer = SpatialIndexer.build(base=3, code_length=3)
    np.testing.assert_array_equal(indexer.index(4, 1), [0.0, 4.0, 1.0])
    assert indexer.index(0, 0).dtype == np.float64


def test_n_hot_injective_over_three_classes() -> None:
    indexer = SpatialIndexer.build(base=3, code_length=3)
    indices, _, _ = indexer.matrix({0: 27, 1: 27, 2: 27})
    assert len({tuple(row) for row in indices}) == 81


def test_random_embedding_is_seeded_and_cached() -> None:
    a = SpatialIndexer.build(base=3, code_length=4, embedding="random", seed=5)
    b = SpatialIndexer.build(base=3, code_length=4, embedding="random", seed=5)
    np.testing.assert_array_equal(a.class_embedding(7), b.class_embedding(7))
    assert a.class_embedding(7) is a.class_embedding(7)
    assert not a.class_embedding(7).flags.writeable


def test_none_embedding_gives_bare_codes() -> None:
    indexer = SpatialIndexer.build(base=2, code_length=3, embedding="none")
    np.testing.assert_array_equal(indexer.index(3, 9), indexer.code(3))


def test_n_hot_needs_enough_dimensions() -> None:
    indexer = SpatialIndexer.build(base=3, code_length=3)
    with pytest.raises(SchemeCapacityError):
        indexer.class_embedding(3)


def test_enumerate_order_and_capacity() -> None:
    indexer = SpatialIndexer.build(base=2, code_length=2)
    entries = indexer.enumerate({1: 2, 0: 3})
    assert [(e.label, e.i) for e in entries] == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)]
    with pytest.raises(CapacityExceededError, match="class 0"):
        indexer.enumerate({0: 5})
    with pytest.raises(ParameterError, match="negative"):
        indexer.enumerate({0: 1, 1: -1})


def test_config_requires_code_length() -> None:
    with pytest.raises(ParameterError):
        SpatialIndexer(IndexerConfig())
    assert SpatialIndexer(IndexerConfig(), code_length=4).length == 4
