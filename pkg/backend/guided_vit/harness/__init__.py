"""Training, evaluation, checkpoints and sweeps."""

from .bench import sweep, write_bench_csv
from .checkpoint import load_checkpoint, read_checkpoint_manifest, save_checkpoint
from .evaluator import ClipPrediction, evaluate, predict_clip, render_metrics, write_metrics
from .metrics import classification_metrics, confusion_matrix
from .optim import AdamW, ParamGroup, clip_grad_norm, cosine_lr, global_grad_norm
from .trainer import Trainer, TrainResult, build_optimizer, train
from .windows import ClipSource, center_start, view_starts

__all__ = [
    "AdamW",
    "ClipPrediction",
    "ClipSource",
    "ParamGroup",
    "TrainResult",
    "Trainer",
    "build_optimizer",
    "center_start",
    "classification_metrics",
    "clip_grad_norm",
    "confusion_matrix",
    "cosine_lr",
    "evaluate",
    "global_grad_norm",
    "load_checkpoint",
    "predict_clip",
    "read_checkpoint_manifest",
    "render_metrics",
    "save_checkpoint",
    "sweep",
    "train",
    "view_starts",
    "write_bench_csv",
    "write_metrics",
]
