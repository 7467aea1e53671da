from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from transpose_kit.errors import CapacityExceededError, IntegrityError, ParameterError
from transpose_kit.nn import Model
from transpose_kit.stego import (
    bit_error_rate,
    dead_kernel_capacity,
    images_to_payload,
    kernel_units,
    load_manifest,
    low_bits_capacity,
    manifest_path,
    payload_intact,
    payload_to_images,
    save_manifest,
    stego_embed,
    stego_extract,
)

PAYLOAD = b"memorized samples ride along in the weights. " * 2


def _weights(model: Model) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in model.params.items()}


@pytest.mark.parametrize("bits", [1, 4, 8, 16])
def test_lsb_round_trip(fc_model: Model, bits: int) -> None:
    carrier, manifest = stego_embed(fc_model, PAYLOAD, "lsb", bits_per_param=bits)
    received = stego_extract(carrier, manifest)
    assert received == PAYLOAD
    assert payload_intact(received, manifest)
    assert manifest.bits_per_param == bits
    assert manifest.capacity_bytes == low_bits_capacity(fc_model, bits)


def test_lsb_leaves_source_and_high_bits_alone(fc_model: Model) -> None:
    before = _weights(fc_model)
    carrier, _ = stego_embed(fc_model, PAYLOAD, "lsb", bits_per_param=4)
    for name, original in before.items():
        np.testing.assert_array_equal(fc_model.params[name].data, original)
        changed = carrier.params[name].data
        assert np.all(np.abs(changed - original) <= np.abs(original) * 2.0**-19 + 1e-37)


def test_last_bytes_round_trip(fc_model: Model) -> None:
    carrier, manifest = stego_embed(fc_model, PAYLOAD, "last_bytes")
    assert manifest.bits_per_param == 24
    assert stego_extract(carrier, manifest) == PAYLOAD


@pytest.mark.parametrize("encoding", ["raw", "pixel"])
def test_dead_kernel_round_trip(fc_model: Model, encoding: str) -> None:
    carrier, manifest = stego_embed(fc_model, PAYLOAD, "dead_kernel", encoding=encoding)
    assert stego_extract(carrier, manifest) == PAYLOAD
    assert manifest.units
    assert manifest.capacity_bytes == dead_kernel_capacity(fc_model, encoding)


def test_dead_kernel_overwrites_weakest_units(fc_model: Model) -> None:
    weakest = min(kernel_units(fc_model), key=lambda pair: pair[1])[0]
    _, manifest = stego_embed(fc_model, b"x", "dead_kernel")
    assert manifest.units == [weakest]


def test_capacity_is_enforced(fc_model: Model) -> None:
    capacity = low_bits_capacity(fc_model, 2)
    with pytest.raises(CapacityExceededError, match=str(capacity)):
        stego_embed(fc_model, bytes(capacity + 1), "lsb", bits_per_param=2)
    with pytest.raises(CapacityExceededError):
        stego_embed(fc_model, bytes(dead_kernel_capacity(fc_model, "pixel") + 1), "dead_kernel", encoding="pixel")


@pytest.mark.parametrize("bits", [0, 24])
def test_lsb_bit_range(fc_model: Model, bits: int) -> None:
    with pytest.raises(ParameterError):
        stego_embed(fc_model, PAYLOAD, "lsb", bits_per_param=bits)


def test_extract_rejects_foreign_layout(fc_model: Model) -> None:
    carrier, manifest = stego_embed(fc_model, PAYLOAD, "lsb")
    tampered = manifest.model_copy(update={"param_shapes": {"layer1.weight": [1, 1]}})
    with pytest.raises(IntegrityError):
        stego_extract(carrier, tampered)


def test_manifest_file_round_trip(fc_model: Model, tmp_path: Path) -> None:
    _, manifest = stego_embed(fc_model, PAYLOAD, "dead_kernel", encoding="pixel")
    path = save_manifest(manifest, manifest_path(tmp_path / "carrier.tpsm"))
    assert path.name == "carrier.stego.json"
    assert load_manifest(path) == manifest


def test_load_manifest_rejects_garbage(tmp_path: Path) -> None:
    bad = tmp_path / "bad.stego.json"
    bad.write_text('{"method": "lsb"}')
    with pytest.raises(IntegrityError):
        load_manifest(bad)
    bad.write_text("not json")
    with pytest.raises(IntegrityError):
        load_manifest(bad)


def test_bit_error_rate() -> None:
    assert bit_error_rate(b"\x00\x00", b"\x00\x00") == 0.0
    assert bit_error_rate(b"\x00", b"\xff") == 1.0
    assert bit_error_rate(b"\x00\x01", b"\x00\x00") == pytest.approx(1 / 16)
    assert bit_error_rate(b"\xff\xff", b"\xff") == pytest.approx(0.5)
    assert bit_error_rate(b"", b"abc") == 0.0


def test_images_survive_as_payload(fc_model: Model, rng: np.random.Generator) -> None:
    images = rng.uniform(size=(3, 1, 6, 6)).astype(np.float32)
    payload, shapes = images_to_payload(images)
    assert len(payload) == images.size
    carrier, manifest = stego_embed(fc_model, payload, "lsb", image_shapes=shapes)
    restored = payload_to_images(stego_extract(carrier, manifest), manifest.image_shapes)
    np.testing.assert_allclose(restored, images, atol=0.5 / 255 + 1e-6)
