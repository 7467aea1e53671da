"""First-order optimizers updating parameter buffers in place."""

from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

import numpy as np

from transpose_kit.autodiff.tensor import Array, Tensor
from transpose_kit.errors import ParameterError

OptimizerName = Literal["sgd", "adam", "adamw"]


class Optimizer:
    """Base class; subclasses implement `_update` for one parameter."""

    def __init__(self, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0) -> None:
        if lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {lr}")
        if weight_decay < 0:
            raise ParameterError(f"weight decay must be >= 0, got {weight_decay}")
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.steps = 0

    def zero_grad(self) -> None:
        for param in self.params:
            param.grad = None

    def step(self) -> None:
        self.steps += 1
        for index, param in enumerate(self.params):
            if param.grad is None:
                continue
            # In place: transposed views and other models alias these buffers.
            param.data -= self._update(index, param, param.grad).astype(param.data.dtype)

    def _update(self, index: int, param: Tensor, grad: Array) -> Array:
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float,
        momentum: float = 0.0,
        weight_decay: float = 0.0,
    ) -> None:
        super().__init__(params, lr, weight_decay)
        self.momentum = momentum
        self._velocity: dict[int, Array] = {}

    def _update(self, index: int, param: Tensor, grad: Array) -> Array:
        if self.weight_decay:
            grad = grad + self.weight_decay * param.data
        if self.momentum:
            velocity = self._velocity.get(index)
            velocity = grad if velocity is None else self.momentum * velocity + grad
            self._velocity[index] = velocity
            grad = velocity
        return self.lr * grad


class Adam(Optimizer):
    """Adam; `weight_decay` is added to the gradient (coupled L2)."""

    decoupled = False

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> None:
        super().__init__(params, lr, weight_decay)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self._first: dict[int, Array] = {}
        self._second: dict[int, Array] = {}

    def _update(self, index: int, param: Tensor, grad: Array) -> Array:
        if self.weight_decay and not self.decoupled:
            grad = grad + self.weight_decay * param.data
        first = self._first.get(index, np.zeros_like(grad))
        second = self._second.get(index, np.zeros_like(grad))
        first = self.beta1 * first + (1 - self.beta1) * grad
        second = self.beta2 * second + (1 - self.beta2) * grad * grad
        self._first[index], self._second[index] = first, second
        first_hat = first / (1 - self.beta1**self.steps)
        second_hat = second / (1 - self.beta2**self.steps)
        update = self.lr * first_hat / (np.sqrt(second_hat) + self.eps)
        if self.weight_decay and self.decoupled:
            update = update + self.lr * self.weight_decay * param.data
        return update


class AdamW(Adam):
    """Adam with decoupled weight decay."""

    decoupled = True


def make_optimizer(
    name: OptimizerName, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0
) -> Optimizer:
    if name == "sgd":
        return SGD(params, lr, momentum=0.9, weight_decay=weight_decay)
    if name == "adam":
        return Adam(params, lr, weight_decay=weight_decay)
    if name == "adamw":
        return AdamW(params, lr, weight_decay=weight_decay)
    raise ParameterError(f"unknown optimizer '{name}'")


__all__ = ["Optimizer", "OptimizerName", "SGD", "Adam", "AdamW", "make_optimizer"]
