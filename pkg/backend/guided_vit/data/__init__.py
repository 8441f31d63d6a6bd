"""Synthetic data generation and dataset files."""

from .dataset import (
    Dataset,
    generate_clips,
    read_dataset,
    read_manifest,
    write_dataset,
)
from .synthetic import (
    LANDMARKS,
    PATTERNS,
    GeneratedClip,
    class_names,
    clip_plan,
    clips_per_class,
    derive_seed,
    generate_clip,
    resize_nearest,
    split_ids,
    splitmix64,
)

__all__ = [
    "LANDMARKS",
    "PATTERNS",
    "Dataset",
    "GeneratedClip",
    "class_names",
    "clip_plan",
    "clips_per_class",
    "derive_seed",
    "generate_clip",
    "generate_clips",
    "read_dataset",
    "read_manifest",
    "resize_nearest",
    "split_ids",
    "splitmix64",
    "write_dataset",
]
