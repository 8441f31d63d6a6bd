"""Minimal dense-tensor engine with reverse-mode derivatives."""

from .core import Tensor, as_tensor, default_dtype, grad_enabled, no_grad, precision
from .gradcheck import grad_check, relative_error
from .ops import (
    add,
    concat,
    conv1x1,
    conv_transpose2d,
    gather_rows,
    gelu,
    layernorm,
    linear,
    matmul,
    mean,
    reshape,
    scale,
    softmax_rows,
    split,
    sum_all,
    transpose,
)
from .ptnsr import read_ptnsr, write_ptnsr

__all__ = [
    "Tensor",
    "add",
    "as_tensor",
    "concat",
    "conv1x1",
    "conv_transpose2d",
    "default_dtype",
    "gather_rows",
    "gelu",
    "grad_check",
    "grad_enabled",
    "layernorm",
    "linear",
    "matmul",
    "mean",
    "no_grad",
    "precision",
    "read_ptnsr",
    "relative_error",
    "reshape",
    "scale",
    "softmax_rows",
    "split",
    "sum_all",
    "transpose",
    "write_ptnsr",
]
