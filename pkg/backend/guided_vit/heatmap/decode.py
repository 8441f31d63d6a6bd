"""Heatmap decoding and error metrics."""

from __future__ import annotations

import numpy as np
from loguru import logger

from ..errors import ShapeError
from .render import HeatmapSet


def _maps(value: HeatmapSet | np.ndarray) -> np.ndarray:
    maps = value.maps if isinstance(value, HeatmapSet) else np.asarray(value)
    if maps.ndim != 3:
        msg = f"Expected L x Hh x Wh maps, got shape {maps.shape}"
        raise ShapeError(msg)
    return maps


def decode_keypoints(pred: HeatmapSet | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Argmax cell per landmark.

    Returns:
        ``L × 2`` integer (x, y) grid cells and an ``L`` validity mask; an
        all-zero channel is invalid. Ties resolve to the lowest row-major cell.
    """
    maps = _maps(pred)
    n, _, width = maps.shape
    flat = maps.reshape(n, -1)
    best = flat.argmax(axis=1)
    coords = np.stack([best % width, best // width], axis=1).astype(np.int64)
    valid = np.any(flat != 0, axis=1)
    if isinstance(pred, HeatmapSet):
        valid &= pred.valid
    return coords, valid


def heatmap_mae(pred: HeatmapSet | np.ndarray, gt: HeatmapSet) -> float:
    """Mean absolute error over every cell of the ground truth's valid channels."""
    maps = _maps(pred)
    if maps.shape != gt.maps.shape:
        msg = f"Prediction {maps.shape} vs ground truth {gt.maps.shape}"
        raise ShapeError(msg)
    if not gt.valid.any():
        logger.warning("heatmap_mae: no valid landmarks, returning 0")
        return 0.0
    return float(np.abs(maps[gt.valid] - gt.maps[gt.valid]).mean())
