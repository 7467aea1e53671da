"""
Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a numpy array. Operations on tensors that require gradients
record their parents and a backward closure; `backward` walks the resulting
`ComputeGraph` in reverse topological order and accumulates gradients into
the `.grad` buffers of the leaf tensors.
"""

from __future__ import annotations

import itertools
from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Any

import numpy as np
import numpy.typing as npt

from transpose_kit.errors import ContractError, DimensionError, NonFiniteError

Array = npt.NDArray[Any]
BackwardFn = Callable[[Array], Sequence[Array | None]]

_GRAD_ENABLED: ContextVar[bool] = ContextVar("grad_enabled", default=True)
_DTYPE: ContextVar[type[np.floating[Any]]] = ContextVar("dtype", default=np.float32)
_NODE_IDS = itertools.count()


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording inside the block."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


@contextmanager
def precision(dtype: type[np.floating[Any]]) -> Iterator[None]:
    """Create tensors with `dtype` inside the block (float64 for gradient oracles)."""
    token = _DTYPE.set(dtype)
    try:
        yield
    finally:
        _DTYPE.reset(token)


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


def default_dtype() -> type[np.floating[Any]]:
    return _DTYPE.get()


class Tensor:
    """
    Dense n-dimensional float array with optional gradient storage.

    Attributes:
        data: Row-major numpy array of the current default dtype.
        grad: Accumulated gradient with the same shape as `data`, or None.
        requires_grad: Whether backward should produce a gradient for it.
        op: Tag of the operation that produced the tensor ("leaf" for inputs).
        parents: Input tensors of that operation.
        node_id: Process-unique id used in graph records and diagnostics.
    """

    __slots__ = (
        "data",
        "grad",
        "requires_grad",
        "op",
        "parents",
        "backward_fn",
        "node_id",
        "name",
    )

    def __init__(
        self,
        data: npt.ArrayLike,
        requires_grad: bool = False,
        *,
        name: str | None = None,
        op: str = "leaf",
        parents: tuple[Tensor, ...] = (),
        backward_fn: BackwardFn | None = None,
    ) -> None:
        self.data: Array = np.asarray(data, dtype=default_dtype())
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self.op = op
        self.parents = parents
        self.backward_fn = backward_fn
        self.node_id = next(_NODE_IDS)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return not self.parents

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{label}, requires_grad={self.requires_grad})"

    # Operator sugar; the implementations live below as module functions.
    def __add__(self, other: Tensor | float) -> Tensor:
        return add(self, other)

    def __radd__(self, other: float) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Tensor | float) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: float) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Tensor | float) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: float) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: float) -> Tensor:
        return mul(self, 1.0 / other)

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def sum(self) -> Tensor:
        return tensor_sum(self)

    def mean(self) -> Tensor:
        return tensor_mean(self)

    def reshape(self, *shape: int) -> Tensor:
        return reshape(self, shape)

    def transpose(self, *axes: int) -> Tensor:
        return permute(self, axes or None)


def as_tensor(value: Tensor | npt.ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_result(
    data: Array, parents: Sequence[Tensor], op: str, backward_fn: BackwardFn
) -> Tensor:
    """Wrap an op result, recording the graph edge only when a parent needs grad."""
    tracked = grad_enabled() and any(p.requires_grad for p in parents)
    if not tracked:
        return Tensor(data, op=op)
    return Tensor(
        data,
        requires_grad=True,
        op=op,
        parents=tuple(parents),
        backward_fn=backward_fn,
    )


def unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise arithmetic


def add(a: Tensor | float, b: Tensor | float) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return unbroadcast(g, ta.shape), unbroadcast(g, tb.shape)

    return make_result(ta.data + tb.data, (ta, tb), "add", backward_fn)


def sub(a: Tensor | float, b: Tensor | float) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return unbroadcast(g, ta.shape), unbroadcast(-g, tb.shape)

    return make_result(ta.data - tb.data, (ta, tb), "sub", backward_fn)


def mul(a: Tensor | float, b: Tensor | float) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return unbroadcast(g * tb.data, ta.shape), unbroadcast(g * ta.data, tb.shape)

    return make_result(ta.data * tb.data, (ta, tb), "mul", backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """
    Batched matrix product `a @ b` over the last two axes.

    Raises:
        DimensionError: if either operand has fewer than two axes or the
            inner dimensions disagree.
    """
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward_fn(g: Array) -> Sequence[Array | None]:
        grad_a = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        grad_b = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return grad_a, grad_b

    return make_result(a.data @ b.data, (a, b), "matmul", backward_fn)


# Reductions


def tensor_sum(x: Tensor) -> Tensor:
    total = np.sum(x.data, dtype=np.float64)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return (np.broadcast_to(g, x.shape).astype(x.data.dtype),)

    return make_result(np.asarray(total), (x,), "sum", backward_fn)


def tensor_mean(x: Tensor) -> Tensor:
    count = max(x.size, 1)
    total = np.sum(x.data, dtype=np.float64) / count

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return (np.broadcast_to(g / count, x.shape).astype(x.data.dtype),)

    return make_result(np.asarray(total), (x,), "mean", backward_fn)


def sum_axis(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g: Array) -> Sequence[Array | None]:
        grad = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(grad, x.shape).copy(),)

    return make_result(out, (x,), "sum_axis", backward_fn)


def mean_axis(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    count = x.shape[axis]
    return mul(sum_axis(x, axis, keepdims), 1.0 / count)


# Shape manipulation


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(shape))
    except ValueError as exc:
        raise DimensionError(f"cannot reshape {x.shape} into {tuple(shape)}") from exc

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return (g.reshape(x.shape),)

    return make_result(out, (x,), "reshape", backward_fn)


def permute(x: Tensor, axes: Sequence[int] | None = None) -> Tensor:
    order = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inverse = tuple(np.argsort(order))

    def backward_fn(g: Array) -> Sequence[Array | None]:
        return (np.transpose(g, inverse),)

    return make_result(np.transpose(x.data, order), (x,), "permute", backward_fn)


def swap_last(x: Tensor) -> Tensor:
    """Swap the last two axes; a view, so transposed weights alias their source."""
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return permute(x, axes)


# Graph traversal


@dataclass(frozen=True, slots=True)
class GraphRecord:
    """One operation in a recorded graph."""

    node_id: int
    op: str
    input_ids: tuple[int, ...]
    shape: tuple[int, ...]


class ComputeGraph:
    """
    Topologically ordered nodes reachable from an output tensor.

    Only nodes that require gradients are visited; each appears exactly once
    and after all of its inputs.
    """

    def __init__(self, nodes: list[Tensor]) -> None:
        self.nodes = nodes

    @classmethod
    def from_output(cls, output: Tensor) -> ComputeGraph:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if node.node_id in visited:
                continue
            visited.add(node.node_id)
            stack.append((node, True))
            for parent in node.parents:
                if parent.requires_grad and parent.node_id not in visited:
                    stack.append((parent, False))
        return cls(order)

    @property
    def leaves(self) -> list[Tensor]:
        return [node for node in self.nodes if node.is_leaf]

    @property
    def records(self) -> list[GraphRecord]:
        return [
            GraphRecord(
                node.node_id,
                node.op,
                tuple(p.node_id for p in node.parents),
                node.shape,
            )
            for node in self.nodes
        ]

    def first_non_finite(self) -> Tensor | None:
        for node in self.nodes:
            if not np.all(np.isfinite(node.data)):
                return node
        return None

    def __len__(self) -> int:
        return len(self.nodes)


def backward(loss: Tensor) -> dict[Tensor, Array]:
    """
    Accumulate d(loss)/d(leaf) into every reachable leaf's `.grad`.

    Gradients accumulate across calls; callers zero them between steps.

    Returns:
        Mapping from each leaf tensor requiring grad to its gradient buffer.

    Raises:
        ContractError: if `loss` is not a scalar.
        NonFiniteError: if a propagated gradient contains NaN or Inf.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}

    graph = ComputeGraph.from_output(loss)
    pending: dict[int, Array] = {loss.node_id: np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        g = pending.pop(node.node_id, None)
        if g is None:
            continue
        if node.is_leaf:
            g = g.astype(node.data.dtype, copy=False).reshape(node.shape)
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        assert node.backward_fn is not None
        for parent, parent_grad in zip(node.parents, node.backward_fn(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            if not np.all(np.isfinite(parent_grad)):
                raise NonFiniteError(
                    f"non-finite gradient flowing out of '{node.op}'", parent.node_id
                )
            previous = pending.get(parent.node_id)
            pending[parent.node_id] = (
                parent_grad if previous is None else previous + parent_grad
            )

    return {leaf: leaf.grad for leaf in graph.leaves if leaf.grad is not None}


__all__ = [
    "Array",
    "Tensor",
    "ComputeGraph",
    "GraphRecord",
    "as_tensor",
    "make_result",
    "unbroadcast",
    "add",
    "sub",
    "mul",
    "matmul",
    "tensor_sum",
    "tensor_mean",
    "sum_axis",
    "mean_axis",
    "reshape",
    "permute",
    "swap_last",
    "backward",
    "no_grad",
    "precision",
    "grad_enabled",
    "default_dtype",
]
