from __future__ import annotations

import numpy as np
import pytest

from transpose_kit.data import LabeledDataset, MemorizationSet
from transpose_kit.errors import ParameterError
from transpose_kit.nn import Model
from transpose_kit.stego import (
    NOISE_SWEEP_COLUMNS,
    StegoVariant,
    TransposeVariant,
    add_param_noise,
    noise_sweep,
    stego_embed,
)
from transpose_kit.training import secondary_mse


def test_zero_noise_is_bit_identical(fc_model: Model) -> None:
    noisy = add_param_noise(fc_model, 0.0, seed=3)
    assert noisy is not fc_model
    for name, tensor in fc_model.params.items():
        np.testing.assert_array_equal(noisy.params[name].data, tensor.data)


def test_noise_is_seeded_and_scaled(fc_model: Model) -> None:
    a = add_param_noise(fc_model, 0.1, seed=1)
    b = add_param_noise(fc_model, 0.1, seed=1)
    c = add_param_noise(fc_model, 0.1, seed=2)
    name = "layer1.weight"
    np.testing.assert_array_equal(a.params[name].data, b.params[name].data)
    assert not np.array_equal(a.params[name].data, c.params[name].data)
    delta = a.params[name].data - fc_model.params[name].data
    assert 0.05 < float(delta.std()) < 0.2


def test_relative_noise_follows_parameter_scale(fc_model: Model) -> None:
    name = "layer1.weight"
    scale = float(fc_model.params[name].data.std())
    noisy = add_param_noise(fc_model, 1.0, seed=0, mode="relative")
    delta = noisy.params[name].data - fc_model.params[name].data
    assert float(delta.std()) == pytest.approx(scale, rel=0.25)


def test_negative_sigma(fc_model: Model) -> None:
    with pytest.raises(ParameterError):
        add_param_noise(fc_model, -0.1)


def _variants(
    fc_model: Model, trained: Model, memorized: MemorizationSet
) -> tuple[list[StegoVariant], list[TransposeVariant]]:
    payload = b"0123456789abcdef" * 4
    carrier, manifest = stego_embed(fc_model, payload, "lsb", bits_per_param=8)
    return (
        [StegoVariant("lsb8", carrier, manifest, payload)],
        [TransposeVariant("transposed", trained, memorized)],
    )


def test_noise_sweep_rows(
    fc_model: Model, trained: Model, memorized: MemorizationSet, test_set: LabeledDataset
) -> None:
    stego, transpose = _variants(fc_model, trained, memorized)
    frame = noise_sweep(stego, transpose, [0.0, 0.05], test_set, seeds=[0])
    assert frame.columns == NOISE_SWEEP_COLUMNS
    assert frame.height == 4
    clean = frame.filter(frame["sigma"] == 0.0)
    stego_row = clean.filter(clean["kind"] == "lsb").row(0, named=True)
    assert stego_row["bit_error_rate"] == 0.0
    assert stego_row["extraction_mse"] is None
    transpose_row = clean.filter(clean["kind"] == "transpose").row(0, named=True)
    assert transpose_row["bit_error_rate"] is None
    assert transpose_row["extraction_mse"] <= secondary_mse(trained, memorized) + 1e-9
    noisy = frame.filter((frame["sigma"] == 0.05) & (frame["kind"] == "lsb")).row(0, named=True)
    assert noisy["bit_error_rate"] > 0.0


def test_noise_sweep_validates_grid(
    fc_model: Model, trained: Model, memorized: MemorizationSet, test_set: LabeledDataset
) -> None:
    stego, transpose = _variants(fc_model, trained, memorized)
    with pytest.raises(ParameterError):
        noise_sweep(stego, transpose, [0.1, 0.1], test_set)
    with pytest.raises(ParameterError):
        noise_sweep(stego, transpose, [], test_set)
    with pytest.raises(ParameterError):
        noise_sweep([], transpose, [0.1], test_set)
