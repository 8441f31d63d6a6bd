"""Keep-rate / merge-rate sweeps: cost for every grid point, accuracy on request."""

from __future__ import annotations

import csv
from collections.abc import Sequence
from pathlib import Path

from loguru import logger

from ..data import Dataset
from ..flops import model_flops
from ..schemas import BenchRow
from ..settings import RunConfig
from ..video import ClipSpec
from .evaluator import evaluate
from .trainer import Trainer

BENCH_COLUMNS = ("rho", "lambda", "gflops", "micro_accuracy", "macro_accuracy")


def sweep(
    cfg: RunConfig,
    rhos: Sequence[float],
    lams: Sequence[float],
    *,
    cost_cfg: RunConfig | None = None,
    dataset: Dataset | None = None,
) -> list[BenchRow]:
    """One row per (λ, ρ), λ-major and ρ ascending.

    Costs come from `cost_cfg` (defaults to `cfg`); accuracy columns are
    filled only when a dataset is given, by training `cfg` at that point.
    """
    cost_base = cost_cfg or cfg
    spec = ClipSpec.from_config(cost_base.clip)
    rows: list[BenchRow] = []
    for lam in lams:
        for rho in sorted(rhos):
            selection = cost_base.selection.model_copy(update={"rho": rho, "lam": lam})
            report = model_flops(
                spec,
                cost_base.encoder,
                selection,
                cost_base.heads,
                pose_tokens=cost_base.pose_tokens,
            )
            row = BenchRow(rho=rho, lam=lam, gflops=report.total_gflops)
            if dataset is not None:
                point = cfg.model_copy(
                    update={"selection": cfg.selection.model_copy(update={"rho": rho, "lam": lam})}
                )
                result = Trainer(point, dataset).fit()
                metrics, _ = evaluate(result.model, dataset, point, "test")
                row.micro_accuracy = metrics.micro_accuracy
                row.macro_accuracy = metrics.macro_accuracy
            logger.info("bench rho={} lambda={} -> {:.2f} GFLOPs", rho, lam, row.gflops)
            rows.append(row)
    return rows


def write_bench_csv(rows: Sequence[BenchRow], path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.rho,
                    r.lam,
                    f"{r.gflops:.4f}",
                    "" if r.micro_accuracy is None else f"{r.micro_accuracy:.4f}",
                    "" if r.macro_accuracy is None else f"{r.macro_accuracy:.4f}",
                ]
            )
    return target
