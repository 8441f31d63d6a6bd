"""Evaluation: multi-view logits, accuracy metrics and heatmap error."""

from __future__ import annotations

import csv
import json
from contextvars import copy_context
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from rich.console import Console
from rich.table import Table

from ..data import Dataset
from ..heatmap import heatmap_mae
from ..model import VideoTransformer
from ..schemas import ClipEntry, MetricsReport
from ..settings import RunConfig
from ..tensor import no_grad
from .metrics import classification_metrics
from .windows import ClipSource


@dataclass
class ClipPrediction:
    clip_id: str
    label: int
    predicted: int
    logits: np.ndarray
    heatmap_mae: float | None


def predict_clip(
    model: VideoTransformer, source: ClipSource, entry: ClipEntry, cfg: RunConfig
) -> ClipPrediction:
    """Average logits over uniformly spaced windows; heatmap error on the centre one."""
    with no_grad():
        starts = source.starts(entry, cfg.inference.temporal_views)
        logits = []
        for start in starts:
            logits.append(model.forward(source.window(entry, start), cfg.selection).logits.data)
        mean_logits = np.mean(np.stack(logits), axis=0)

        mae = None
        if model.decoder is not None:
            center = source.starts(entry, 1)[0]
            out = model.forward(source.window(entry, center), cfg.selection)
            if out.heatmaps is not None:
                predicted = np.clip(out.heatmaps.data, 0.0, 1.0)
                mae = heatmap_mae(predicted, source.target(entry, center))
    return ClipPrediction(
        clip_id=entry.id,
        label=entry.label,
        predicted=int(np.argmax(mean_logits)),
        logits=mean_logits,
        heatmap_mae=mae,
    )


def evaluate(
    model: VideoTransformer,
    dataset: Dataset,
    cfg: RunConfig,
    split: str = "test",
) -> tuple[MetricsReport, list[ClipPrediction]]:
    """Metrics of `model` over one split, fanned out over `inference.workers` threads."""
    source = ClipSource(dataset, cfg)
    entries = dataset.entries(split)
    workers = cfg.inference.workers

    def run(entry: ClipEntry) -> ClipPrediction:
        return predict_clip(model, source, entry, cfg)

    if workers > 1:
        # each task runs in a copy of the caller's context (precision, grad mode)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(copy_context().run, run, e) for e in entries]
            predictions = [f.result() for f in futures]
    else:
        predictions = [run(e) for e in entries]

    metrics = classification_metrics(
        [p.label for p in predictions], [p.predicted for p in predictions], cfg.heads.num_classes
    )
    maes = [p.heatmap_mae for p in predictions if p.heatmap_mae is not None]
    report = MetricsReport(
        split=split,
        n_clips=len(predictions),
        heatmap_mae=float(np.mean(maes)) if maes else None,
        **metrics,
    )
    return report, predictions


def write_metrics(report: MetricsReport, directory: str | Path) -> Path:
    """metrics.json plus confusion.csv (rows true class, columns predicted)."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    (target / "metrics.json").write_text(
        json.dumps(report.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with (target / "confusion.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        n = len(report.confusion)
        writer.writerow(["true\\pred", *range(n)])
        for c, row in enumerate(report.confusion):
            writer.writerow([c, *row])
    return target


def render_metrics(report: MetricsReport, class_names: list[str], console: Console) -> None:
    table = Table(title=f"{report.split} split ({report.n_clips} clips)")
    table.add_column("Class", style="cyan")
    table.add_column("Support", justify="right")
    table.add_column("Accuracy", justify="right")
    for c, support in enumerate(report.support):
        name = class_names[c] if c < len(class_names) else str(c)
        acc = report.per_class_accuracy.get(c)
        table.add_row(name, str(support), "-" if acc is None else f"{acc:.3f}")
    console.print(table)
    console.print(
        f"micro {report.micro_accuracy:.4f}  macro {report.macro_accuracy:.4f}"
        + ("" if report.heatmap_mae is None else f"  heatmap MAE {report.heatmap_mae:.4f}")
    )
