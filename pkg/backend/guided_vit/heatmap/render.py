"""Ground-truth heatmaps: Gaussian rendering, time averaging, person combination.

Coordinates: a keypoint (x, y) is in input pixels; (x, y) maps to column and
row of the heatmap grid. The Gaussian is centred on the nearest grid cell, so
every valid map peaks at exactly 1.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from ..errors import ShapeError
from ..schemas import KeypointAnnotation
from ..settings import HeatmapConfig


@dataclass
class HeatmapSet:
    """Per-landmark maps ``L × Hh × Wh`` in [0, 1] plus a validity mask."""

    maps: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        if self.maps.ndim != 3 or self.valid.shape != (self.maps.shape[0],):
            msg = f"HeatmapSet maps {self.maps.shape} / valid {self.valid.shape} mismatch"
            raise ShapeError(msg)

    @classmethod
    def empty(cls, landmarks: int, grid: tuple[int, int]) -> HeatmapSet:
        return cls(np.zeros((landmarks, *grid)), np.zeros(landmarks, dtype=bool))

    @property
    def landmarks(self) -> int:
        return self.maps.shape[0]

    @property
    def grid(self) -> tuple[int, int]:
        return (self.maps.shape[1], self.maps.shape[2])


def pixel_to_grid(
    x: float, y: float, clip_hw: tuple[int, int], grid: tuple[int, int]
) -> tuple[float, float]:
    """Scale pixel-centre coordinates onto the heatmap grid (cell centres align)."""
    height, width = clip_hw
    grid_h, grid_w = grid
    return ((x + 0.5) * grid_w / width - 0.5, (y + 0.5) * grid_h / height - 0.5)


def nearest_cell(value: float) -> int:
    return math.floor(value + 0.5)


def render_gaussian(
    kp: tuple[float, float], sigma: float, grid: tuple[int, int]
) -> tuple[np.ndarray, bool]:
    """Gaussian of width `sigma` cells at the cell nearest to grid point `kp`.

    Returns:
        The ``Hh × Wh`` map and whether the keypoint fell inside the grid (a
        zero map otherwise).
    """
    grid_h, grid_w = grid
    cx, cy = nearest_cell(kp[0]), nearest_cell(kp[1])
    if not (0 <= cx < grid_w and 0 <= cy < grid_h):
        return np.zeros(grid), False
    cols = np.arange(grid_w, dtype=np.float64)
    rows = np.arange(grid_h, dtype=np.float64)
    dx2 = (cols - cx) ** 2
    dy2 = (rows - cy) ** 2
    return np.exp(-(dy2[:, None] + dx2[None, :]) / (2.0 * sigma * sigma)), True


def render_keypoints(
    annotation: KeypointAnnotation,
    clip_hw: tuple[int, int],
    grid: tuple[int, int],
    sigma: float = 2.0,
    threshold: float = 0.3,
) -> HeatmapSet:
    """One map per landmark; low-confidence or out-of-frame landmarks are invalid."""
    height, width = clip_hw
    maps = np.zeros((annotation.landmarks, *grid))
    valid = np.zeros(annotation.landmarks, dtype=bool)
    for i, (x, y, conf) in enumerate(annotation.kps):
        if conf <= threshold or not (0 <= x < width and 0 <= y < height):
            continue
        maps[i], valid[i] = render_gaussian(pixel_to_grid(x, y, clip_hw, grid), sigma, grid)
    return HeatmapSet(maps, valid)


def _check_compatible(sets: Sequence[HeatmapSet]) -> None:
    if not sets:
        raise ShapeError("Need at least one HeatmapSet")
    shape = sets[0].maps.shape
    for s in sets[1:]:
        if s.maps.shape != shape:
            msg = f"HeatmapSets disagree on shape: {shape} vs {s.maps.shape}"
            raise ShapeError(msg)


def time_average(frames: Sequence[HeatmapSet]) -> HeatmapSet:
    """Per-landmark mean over the frames where that landmark is valid."""
    _check_compatible(frames)
    maps = np.stack([f.maps for f in frames])
    valid = np.stack([f.valid for f in frames])
    counts = valid.sum(axis=0)
    summed = (maps * valid[:, :, None, None]).sum(axis=0)
    averaged = np.divide(
        summed,
        counts[:, None, None],
        out=np.zeros_like(summed),
        where=counts[:, None, None] > 0,
    )
    return HeatmapSet(averaged, counts > 0)


def combine_multiperson(
    persons: Sequence[HeatmapSet], mode: Literal["max", "sum"] = "max"
) -> HeatmapSet:
    """Fold several people into one set: pointwise max (or clipped sum)."""
    _check_compatible(persons)
    maps = np.stack([p.maps for p in persons])
    combined = maps.max(axis=0) if mode == "max" else np.minimum(maps.sum(axis=0), 1.0)
    return HeatmapSet(combined, np.any([p.valid for p in persons], axis=0))


def clip_heatmaps(
    annotations: Sequence[KeypointAnnotation],
    frames: Sequence[int],
    clip_hw: tuple[int, int],
    grid: tuple[int, int],
    landmarks: int,
    cfg: HeatmapConfig | None = None,
) -> HeatmapSet:
    """Target for a temporal window: combine people per frame, then average frames."""
    cfg = cfg or HeatmapConfig()
    by_frame: dict[int, list[KeypointAnnotation]] = {}
    for ann in annotations:
        by_frame.setdefault(ann.frame, []).append(ann)

    per_frame: list[HeatmapSet] = []
    for frame in frames:
        people = [
            render_keypoints(a, clip_hw, grid, cfg.sigma, cfg.confidence_threshold)
            for a in by_frame.get(frame, [])
        ]
        if any(p.landmarks != landmarks for p in people):
            msg = f"Annotations for frame {frame} do not have {landmarks} landmarks"
            raise ShapeError(msg)
        if people:
            per_frame.append(combine_multiperson(people, cfg.combine))
        else:
            per_frame.append(HeatmapSet.empty(landmarks, grid))
    return time_average(per_frame)
