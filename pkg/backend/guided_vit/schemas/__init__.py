"""Typed records exchanged through files: annotations, manifests, reports."""

from .annotations import KeypointAnnotation
from .dataset import ClipEntry, DatasetManifest, Split
from .reports import BenchRow, CostReport, EpochLog, LayerCost, MetricsReport

__all__ = [
    "BenchRow",
    "ClipEntry",
    "CostReport",
    "DatasetManifest",
    "EpochLog",
    "KeypointAnnotation",
    "LayerCost",
    "MetricsReport",
    "Split",
]
