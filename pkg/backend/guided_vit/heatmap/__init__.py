"""Keypoint heatmaps: synthesis, decoding, metrics and annotation files."""

from .decode import decode_keypoints, heatmap_mae
from .io import read_annotations, write_annotations
from .render import (
    HeatmapSet,
    clip_heatmaps,
    combine_multiperson,
    nearest_cell,
    pixel_to_grid,
    render_gaussian,
    render_keypoints,
    time_average,
)

__all__ = [
    "HeatmapSet",
    "clip_heatmaps",
    "combine_multiperson",
    "decode_keypoints",
    "heatmap_mae",
    "nearest_cell",
    "pixel_to_grid",
    "read_annotations",
    "render_gaussian",
    "render_keypoints",
    "time_average",
    "write_annotations",
]
