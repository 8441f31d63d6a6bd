"""Task heads and losses."""

from .heads import classify, decode_heatmaps
from .losses import loss_cls, loss_hm, smoothed_targets, total_loss
from .params import ClassifierParams, DecoderParams

__all__ = [
    "ClassifierParams",
    "DecoderParams",
    "classify",
    "decode_heatmaps",
    "loss_cls",
    "loss_hm",
    "smoothed_targets",
    "total_loss",
]
