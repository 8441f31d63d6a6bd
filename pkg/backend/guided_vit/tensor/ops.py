"""Differentiable operations on `Tensor`.

Every op validates shapes up front (raising `ShapeError`), computes its result
with NumPy, and registers a backward closure. There is no broadcasting beyond
adding a bias vector along the last axis.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ..errors import ShapeError
from .core import Tensor

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def _shape_error(op: str, detail: str) -> ShapeError:
    return ShapeError(f"{op}: {detail}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of an m×k and a k×n tensor."""
    if a.ndim != 2 or b.ndim != 2:
        raise _shape_error("matmul", f"expected 2-d operands, got {a.dims} and {b.dims}")
    if a.shape[1] != b.shape[0]:
        raise _shape_error("matmul", f"inner dims differ: {a.dims} x {b.dims}")

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g @ b.data.T, a.data.T @ g

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; `b` may also be a bias vector over the last axis of `a`."""
    if a.shape == b.shape:

        def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return g, g

        return Tensor.from_op(a.data + b.data, (a, b), backward, "add")

    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:

        def bias_backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            return g, g.reshape(-1, b.shape[0]).sum(axis=0)

        return Tensor.from_op(a.data + b.data, (a, b), bias_backward, "add")

    raise _shape_error("add", f"cannot add dims {a.dims} and {b.dims}")


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiply every element by a constant."""
    c = float(factor)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * c,)

    return Tensor.from_op(x.data * c, (x,), backward, "scale")


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh approximation."""
    d = x.data
    t = np.tanh(_GELU_C * (d + _GELU_A * d**3))
    out = 0.5 * d * (1.0 + t)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * d**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * d * (1.0 - t**2) * du),)

    return Tensor.from_op(out, (x,), backward, "gelu")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map x·W + b with W stored as (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax over the last axis, stabilised by subtracting the row maximum."""
    if x.ndim < 1 or x.shape[-1] == 0:
        raise _shape_error("softmax_rows", f"empty rows in dims {x.dims}")
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return Tensor.from_op(y, (x,), backward, "softmax_rows")


def layernorm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalise each row of the last axis to zero mean, unit variance, then affine."""
    d = x.shape[-1] if x.ndim else 0
    if d < 1 or gamma.shape != (d,) or beta.shape != (d,):
        raise _shape_error(
            "layernorm", f"x {x.dims} incompatible with gamma {gamma.dims} / beta {beta.dims}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + float(eps))
    xhat = centered * inv
    out = xhat * gamma.data + beta.data

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        gxhat = g * gamma.data
        gx = inv * (
            gxhat
            - gxhat.mean(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
        )
        flat = g.reshape(-1, d)
        return gx, (flat * xhat.reshape(-1, d)).sum(axis=0), flat.sum(axis=0)

    return Tensor.from_op(out, (x, gamma, beta), backward, "layernorm")


def sum_all(x: Tensor, axis: int | None = None) -> Tensor:
    """Sum over one axis, or over everything when `axis` is None."""
    out = np.asarray(x.data.sum(axis=axis))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        expanded = g if axis is None else np.expand_dims(g, axis)
        return (np.broadcast_to(expanded, x.shape).copy(),)

    return Tensor.from_op(out, (x,), backward, "sum")


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    """Arithmetic mean over one axis, or over everything."""
    count = x.data.size if axis is None else x.shape[axis]
    if count == 0:
        raise _shape_error("mean", f"empty reduction over dims {x.dims}")
    return scale(sum_all(x, axis), 1.0 / count)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along `axis` (the token axis by default)."""
    if not tensors:
        raise _shape_error("concat", "nothing to concatenate")
    sizes = [t.shape[axis] for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise _shape_error("concat", str(exc)) from exc
    bounds = np.cumsum(sizes)[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=axis)

    return Tensor.from_op(out, tuple(tensors), backward, "concat")


def split(x: Tensor, sizes: Sequence[int], axis: int = 0) -> list[Tensor]:
    """Split along `axis` into consecutive pieces of the given sizes."""
    if sum(sizes) != x.shape[axis] or any(s < 0 for s in sizes):
        raise _shape_error("split", f"sizes {list(sizes)} do not partition axis of {x.dims}")
    pieces: list[Tensor] = []
    start = 0
    for size in sizes:
        index = [slice(None)] * x.ndim
        index[axis] = slice(start, start + size)
        region = tuple(index)

        def backward(g: np.ndarray, region: tuple[slice, ...] = region) -> tuple[np.ndarray]:
            full = np.zeros_like(x.data)
            full[region] = g
            return (full,)

        pieces.append(Tensor.from_op(x.data[region].copy(), (x,), backward, "split"))
        start += size
    return pieces


def gather_rows(x: Tensor, index: Sequence[int] | np.ndarray) -> Tensor:
    """Select rows of a token-first tensor by index (repeats allowed)."""
    idx = np.asarray(index, dtype=np.int64).reshape(-1)
    if x.ndim < 1 or (idx.size and (idx.min() < 0 or idx.max() >= x.shape[0])):
        raise _shape_error("gather_rows", f"index out of range for dims {x.dims}")

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return Tensor.from_op(x.data[idx], (x,), backward, "gather_rows")


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise _shape_error("transpose", f"expected 2-d tensor, got {x.dims}")

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.ascontiguousarray(g.T),)

    return Tensor.from_op(np.ascontiguousarray(x.data.T), (x,), backward, "transpose")


def reshape(x: Tensor, dims: Sequence[int]) -> Tensor:
    target = tuple(int(d) for d in dims)
    if math.prod(target) != x.data.size:
        raise _shape_error("reshape", f"cannot reshape {x.dims} to {list(target)}")

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(x.shape),)

    return Tensor.from_op(x.data.reshape(target).copy(), (x,), backward, "reshape")


def conv_transpose_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size - 1) * stride - 2 * pad + kernel


def conv_transpose2d(
    x: Tensor,
    kernel: Tensor,
    stride: int = 2,
    pad: int = 1,
    bias: Tensor | None = None,
) -> Tensor:
    """Transposed 2-d convolution of a Cin×H×W map with a Cin×Cout×k×k kernel.

    Each input pixel scatters `kernel[:, :, ki, kj]`-weighted copies of itself
    onto the (H-1)·stride + k sized canvas, which is then cropped by `pad` on
    every border.
    """
    if x.ndim != 3 or kernel.ndim != 4:
        raise _shape_error("conv_transpose2d", f"x {x.dims}, kernel {kernel.dims}")
    cin, h, w = x.shape
    kcin, cout, k, k2 = kernel.shape
    if kcin != cin or k != k2:
        raise _shape_error("conv_transpose2d", f"kernel {kernel.dims} does not fit x {x.dims}")
    if stride < 1 or pad < 0:
        raise _shape_error("conv_transpose2d", f"stride={stride}, pad={pad}")
    out_h = conv_transpose_output_size(h, k, stride, pad)
    out_w = conv_transpose_output_size(w, k, stride, pad)
    if out_h <= 0 or out_w <= 0:
        raise _shape_error("conv_transpose2d", f"nonpositive output size {out_h}x{out_w}")
    if bias is not None and bias.shape != (cout,):
        raise _shape_error("conv_transpose2d", f"bias {bias.dims} for {cout} channels")

    full_h, full_w = (h - 1) * stride + k, (w - 1) * stride + k
    span_h, span_w = stride * (h - 1) + 1, stride * (w - 1) + 1

    # (cout, k, k, h, w): every kernel tap applied to every input pixel
    taps = np.tensordot(kernel.data, x.data, axes=([0], [0]))
    canvas = np.zeros((cout, full_h, full_w), dtype=x.dtype)
    for ki in range(k):
        for kj in range(k):
            canvas[:, ki : ki + span_h : stride, kj : kj + span_w : stride] += taps[:, ki, kj]
    out = canvas[:, pad : pad + out_h, pad : pad + out_w].copy()
    if bias is not None:
        out += bias.data[:, None, None]

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        gcanvas = np.zeros((cout, full_h, full_w), dtype=g.dtype)
        gcanvas[:, pad : pad + out_h, pad : pad + out_w] = g
        gx = np.zeros_like(x.data)
        gk = np.zeros_like(kernel.data)
        for ki in range(k):
            for kj in range(k):
                gs = gcanvas[:, ki : ki + span_h : stride, kj : kj + span_w : stride]
                gx += np.tensordot(kernel.data[:, :, ki, kj], gs, axes=([1], [0]))
                gk[:, :, ki, kj] = np.tensordot(x.data, gs, axes=([1, 2], [1, 2]))
        if bias is None:
            return gx, gk
        return gx, gk, g.sum(axis=(1, 2))

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    return Tensor.from_op(out, parents, backward, "conv_transpose2d")


def conv1x1(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """1×1 convolution of a Cin×H×W map with a Cout×Cin weight."""
    if x.ndim != 3 or weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise _shape_error("conv1x1", f"x {x.dims}, weight {weight.dims}")
    cout = weight.shape[0]
    if bias is not None and bias.shape != (cout,):
        raise _shape_error("conv1x1", f"bias {bias.dims} for {cout} channels")
    out = np.tensordot(weight.data, x.data, axes=([1], [0]))
    if bias is not None:
        out = out + bias.data[:, None, None]

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        gx = np.tensordot(weight.data, g, axes=([0], [0]))
        gw = np.tensordot(g, x.data, axes=([1, 2], [1, 2]))
        if bias is None:
            return gx, gw
        return gx, gw, g.sum(axis=(1, 2))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv1x1")
