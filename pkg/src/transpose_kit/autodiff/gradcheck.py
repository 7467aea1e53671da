"""Finite-difference gradient oracle."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
import numpy.typing as npt

from transpose_kit.errors import ContractError, NonFiniteError

from .tensor import Array, ComputeGraph, Tensor, backward, no_grad, precision

LossBuilder = Callable[[Sequence[Tensor]], Tensor]


def numeric_gradient(
    builder: LossBuilder, params: Sequence[Array], index: int, eps: float
) -> Array:
    """Central differences of the builder's loss w.r.t. `params[index]`."""
    base = [np.array(p, dtype=np.float64) for p in params]
    target = base[index]
    grad = np.zeros_like(target)
    flat, flat_grad = target.reshape(-1), grad.reshape(-1)
    with no_grad():
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + eps
            upper = builder([Tensor(p) for p in base]).item()
            flat[k] = original - eps
            lower = builder([Tensor(p) for p in base]).item()
            flat[k] = original
            flat_grad[k] = (upper - lower) / (2 * eps)
    return grad


def grad_check(
    builder: LossBuilder, params: Sequence[npt.ArrayLike], eps: float = 1e-3
) -> float:
    """
    Compare reverse-mode gradients against central differences.

    The whole check runs in float64. The error for one parameter tensor is
    `||analytic - numeric|| / max(1e-8, ||numeric||)`; the maximum over all
    parameter tensors is returned.

    Raises:
        NonFiniteError: if any intermediate value is NaN/Inf (names the node).
        ContractError: if the builder does not return a scalar.
    """
    arrays = [np.array(p, dtype=np.float64) for p in params]
    with precision(np.float64):
        leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
        loss = builder(leaves)
        if loss.size != 1:
            raise ContractError(f"builder must return a scalar loss, got {loss.shape}")
        if loss.requires_grad:
            bad = ComputeGraph.from_output(loss).first_non_finite()
            if bad is not None:
                raise NonFiniteError(f"non-finite value produced by '{bad.op}'", bad.node_id)
        backward(loss)

        worst = 0.0
        for index, leaf in enumerate(leaves):
            analytic = leaf.grad if leaf.grad is not None else np.zeros_like(arrays[index])
            numeric = numeric_gradient(builder, arrays, index, eps)
            error = float(np.linalg.norm(analytic - numeric)) / max(
                1e-8, float(np.linalg.norm(numeric))
            )
            worst = max(worst, error)
    return worst


__all__ = ["grad_check", "numeric_gradient", "LossBuilder"]
