"""Dense tensor with reverse-mode derivatives.

A `Tensor` wraps a row-major NumPy array. Operations in `ops` build a small
graph by recording, on each output, its parent tensors and a closure that maps
the output gradient to parent gradients. `Tensor.backward` walks that graph in
reverse topological order and accumulates gradients on leaves.

Two precision modes exist: float32 (default, training) and float64
(verification). Switch with the `precision` context manager.
"""

from __future__ import annotations

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

import numpy as np

from ..errors import NumericError, ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_DTYPE: ContextVar[np.dtype] = ContextVar("tensor_dtype", default=np.dtype(np.float32))
_GRAD_ENABLED: ContextVar[bool] = ContextVar("tensor_grad_enabled", default=True)


def default_dtype() -> np.dtype:
    """Return the dtype new tensors are created with."""
    return _DTYPE.get()


@contextmanager
def precision(dtype: Any) -> Iterator[np.dtype]:
    """Temporarily switch the default dtype (float32 or float64)."""
    resolved = np.dtype(dtype)
    if resolved not in (np.dtype(np.float32), np.dtype(np.float64)):
        msg = f"Unsupported precision {resolved}; expected float32 or float64"
        raise ValueError(msg)
    token = _DTYPE.set(resolved)
    try:
        yield resolved
    finally:
        _DTYPE.reset(token)


def grad_enabled() -> bool:
    return _GRAD_ENABLED.get()


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording; ops return plain values."""
    token = _GRAD_ENABLED.set(False)
    try:
        yield
    finally:
        _GRAD_ENABLED.reset(token)


def check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        msg = f"Non-finite values produced by {op}"
        raise NumericError(msg)


class Tensor:
    """Row-major n-dimensional array with an optional gradient.

    Attributes:
        data: Backing array; its shape is the tensor's dims.
        grad: Accumulated gradient, same shape as `data`, or None.
        requires_grad: Whether gradients flow to this tensor.
    """

    __slots__ = ("_backward", "_parents", "data", "grad", "op", "requires_grad")

    def __init__(
        self,
        data: Any,
        *,
        requires_grad: bool = False,
        dtype: Any = None,
    ) -> None:
        arr = np.ascontiguousarray(data, dtype=dtype or default_dtype())
        check_finite(arr, "tensor creation")
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Sequence[Tensor],
        backward: BackwardFn,
        op: str,
    ) -> Tensor:
        """Wrap an op result, recording the graph edge when gradients are on.

        `backward` receives the output gradient and returns one gradient (or
        None) per parent, in order.
        """
        check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.op = op
        track = grad_enabled() and any(p.requires_grad for p in parents)
        out.requires_grad = track
        out._parents = tuple(parents) if track else ()
        out._backward = backward if track else None
        return out

    @property
    def dims(self) -> list[int]:
        return list(self.data.shape)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data, dtype=self.data.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Propagate `grad` (ones for a scalar) back to every leaf."""
        if grad is None:
            if self.data.size != 1:
                msg = f"backward() without a gradient needs a scalar, got dims {self.dims}"
                raise ShapeError(msg)
            grad = np.ones_like(self.data)
        elif grad.shape != self.data.shape:
            msg = f"Gradient dims {list(grad.shape)} do not match tensor dims {self.dims}"
            raise ShapeError(msg)

        pending: dict[int, np.ndarray] = {id(self): grad}
        for node in reversed(self._topological_order()):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g), strict=True):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pending[key] + pg if key in pending else pg

    def _topological_order(self) -> list[Tensor]:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            stack.extend((p, False) for p in node._parents if id(p) not in seen)
        return order

    def __add__(self, other: Tensor) -> Tensor:
        from .ops import add

        return add(self, other)

    def __matmul__(self, other: Tensor) -> Tensor:
        from .ops import matmul

        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(dims={self.dims}, dtype={self.dtype}, op={self.op!r})"


def as_tensor(value: Tensor | np.ndarray | Sequence[Any] | float) -> Tensor:
    """Return `value` unchanged if it is a Tensor, otherwise wrap it."""
    return value if isinstance(value, Tensor) else Tensor(value)
