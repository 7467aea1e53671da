from __future__ import annotations

import numpy as np
import pytest

from transpose_kit.autodiff import Tensor, backward
from transpose_kit.autodiff.tensor import mul, tensor_sum
from transpose_kit.errors import ParameterError
from transpose_kit.nn import SGD, Adam, AdamW, make_optimizer


def _quadratic_step(optimizer_cls, steps: int = 300, **kwargs) -> float:
    w = Tensor([3.0, -2.0], requires_grad=True)
    optimizer = optimizer_cls([w], **kwargs)
    for _ in range(steps):
        optimizer.zero_grad()
        backward(tensor_sum(mul(w, w)))
        optimizer.step()
    return float(np.abs(w.data).max())


@pytest.mark.parametrize(
    ("cls", "kwargs"),
    [(SGD, {"lr": 0.1}), (SGD, {"lr": 0.05, "momentum": 0.9}), (Adam, {"lr": 0.1}), (AdamW, {"lr": 0.1})],
)
def test_optimizers_minimize_a_quadratic(cls, kwargs) -> None:
    assert _quadratic_step(cls, **kwargs) < 0.1


def test_step_updates_in_place() -> None:
    w = Tensor([1.0], requires_grad=True)
    buffer = w.data
    optimizer = SGD([w], lr=0.5)
    backward(tensor_sum(mul(w, w)))
    optimizer.step()
    assert w.data is buffer
    np.testing.assert_allclose(w.data, [0.0])


def test_decoupled_decay_shrinks_without_gradient() -> None:
    w = Tensor([1.0], requires_grad=True)
    optimizer = AdamW([w], lr=0.1, weight_decay=0.5)
    w.grad = np.zeros(1, dtype=np.float32)
    optimizer.step()
    assert 0.0 < w.data[0] < 1.0


def test_unknown_optimizer() -> None:
    with pytest.raises(ParameterError):
        make_optimizer("rmsprop", [], 0.1)  # type: ignore[arg-type]
