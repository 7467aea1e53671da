from __future__ import annotations

from .functional import (
    ACTIVATIONS,
    activation,
    conv2d,
    cross_entropy,
    deconv2d,
    layer_norm,
    mse,
    pool2d,
    softmax,
    upsample_nn,
)
from .gradcheck import grad_check
from .tensor import (
    ComputeGraph,
    Tensor,
    backward,
    matmul,
    no_grad,
    permute,
    precision,
    reshape,
)

__all__ = [
    "ACTIVATIONS",
    "Tensor",
    "ComputeGraph",
    "backward",
    "matmul",
    "permute",
    "reshape",
    "no_grad",
    "precision",
    "conv2d",
    "deconv2d",
    "pool2d",
    "upsample_nn",
    "activation",
    "softmax",
    "layer_norm",
    "cross_entropy",
    "mse",
    "grad_check",
]
