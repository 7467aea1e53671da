from __future__ import annotations

from .architectures import PRESETS, parse_preset, preset
from .layers import LayerSpec, infer_out_shape, transpose_layer
from .model import Model, apply_layer, build_model, transpose_model
from .optim import SGD, Adam, AdamW, Optimizer, make_optimizer

__all__ = [
    "LayerSpec",
    "Model",
    "PRESETS",
    "preset",
    "parse_preset",
    "build_model",
    "apply_layer",
    "transpose_layer",
    "transpose_model",
    "infer_out_shape",
    "Optimizer",
    "SGD",
    "Adam",
    "AdamW",
    "make_optimizer",
]
