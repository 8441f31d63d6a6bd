"""Task losses as fused ops with closed-form gradients."""

from __future__ import annotations

import numpy as np
from loguru import logger

from ..errors import ShapeError
from ..heatmap import HeatmapSet
from ..tensor import Tensor, add, scale


def smoothed_targets(num_classes: int, target: int, eps: float) -> np.ndarray:
    q = np.full(num_classes, eps / num_classes)
    q[target] += 1.0 - eps
    return q


def loss_cls(logits: Tensor, target: int, eps: float = 0.1) -> Tensor:
    """Cross-entropy against (1 − eps)·onehot + eps/C."""
    if logits.ndim != 1:
        msg = f"Expected a logit vector, got dims {logits.dims}"
        raise ShapeError(msg)
    n = logits.shape[0]
    if not 0 <= target < n:
        msg = f"Target class {target} outside 0..{n - 1}"
        raise ShapeError(msg)
    z = logits.data
    shifted = z - z.max()
    log_norm = np.log(np.exp(shifted).sum())
    log_p = shifted - log_norm
    q = smoothed_targets(n, target, eps).astype(z.dtype)
    value = np.asarray(-(q * log_p).sum(), dtype=z.dtype)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * (np.exp(log_p) - q),)

    return Tensor.from_op(value, (logits,), backward, "loss_cls")


def loss_hm(pred: Tensor, gt: HeatmapSet, mse_scale: float = 1000.0) -> Tensor:
    """ln(1 + s·MSE) over the ground truth's valid channels."""
    if pred.shape != gt.maps.shape:
        msg = f"Predicted heatmaps {pred.dims} vs ground truth {list(gt.maps.shape)}"
        raise ShapeError(msg)
    s = float(mse_scale)
    mask = gt.valid
    if not mask.any():
        logger.warning("loss_hm: no valid landmarks, loss is 0")

        def zero_backward(g: np.ndarray) -> tuple[np.ndarray]:
            return (np.zeros_like(pred.data),)

        return Tensor.from_op(np.zeros((), dtype=pred.dtype), (pred,), zero_backward, "loss_hm")

    diff = np.zeros_like(pred.data)
    diff[mask] = pred.data[mask] - gt.maps[mask]
    count = int(mask.sum()) * gt.maps.shape[1] * gt.maps.shape[2]
    mse = float((diff**2).sum()) / count
    value = np.asarray(np.log1p(s * mse), dtype=pred.dtype)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * (s / (1.0 + s * mse)) * (2.0 / count) * diff,)

    return Tensor.from_op(value, (pred,), backward, "loss_hm")


def total_loss(
    cls_loss: Tensor,
    hm_loss: Tensor | None = None,
    w_cls: float = 1.0,
    w_hm: float = 1.0,
) -> Tensor:
    """w_cls·loss_cls + w_hm·loss_hm (classification only when no heatmap loss)."""
    weighted = scale(cls_loss, w_cls)
    if hm_loss is None:
        return weighted
    return add(weighted, scale(hm_loss, w_hm))
