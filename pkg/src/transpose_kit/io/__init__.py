from __future__ import annotations

from .modelfile import (
    ModelFile,
    decode_model,
    encode_model,
    load_model,
    model_digest,
    read_model_file,
    save_model,
)

__all__ = [
    "ModelFile",
    "decode_model",
    "encode_model",
    "load_model",
    "model_digest",
    "read_model_file",
    "save_model",
]
