from __future__ import annotations

from .embed import (
    StegoManifest,
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
from .noise import NOISE_SWEEP_COLUMNS, StegoVariant, TransposeVariant, add_param_noise, noise_sweep

__all__ = [
    "StegoManifest",
    "bit_error_rate",
    "dead_kernel_capacity",
    "images_to_payload",
    "kernel_units",
    "load_manifest",
    "low_bits_capacity",
    "manifest_path",
    "payload_intact",
    "payload_to_images",
    "save_manifest",
    "stego_embed",
    "stego_extract",
    "NOISE_SWEEP_COLUMNS",
    "StegoVariant",
    "TransposeVariant",
    "add_param_noise",
    "noise_sweep",
]
