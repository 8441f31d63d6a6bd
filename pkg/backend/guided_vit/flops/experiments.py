"""Cost-table configurations shipped under ``config/experiments``.

Each YAML file is a run config plus an ``experiment`` block naming the row,
the cost it is compared against, and whether the keep rate should be solved
for that cost instead of taken from the file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, ValidationError
from rich.console import Console
from rich.table import Table

from ..errors import ConfigError
from ..schemas import CostReport
from ..settings import CONFIG_DIR, RunConfig, deep_merge, load_run_config, read_run_file
from ..video import ClipSpec
from .cost_model import report_for, solve_keep_rate

EXPERIMENTS_DIR = CONFIG_DIR / "experiments"


class ExperimentSpec(BaseModel):
    label: str
    reported_gflops: float | None = Field(default=None, gt=0.0)
    solve_keep_rate: bool = False
    approximate: bool = Field(
        default=False, description="The reported cost comes from a different merge schedule."
    )


@dataclass
class ExperimentResult:
    name: str
    experiment: ExperimentSpec
    config: RunConfig
    report: CostReport

    @property
    def rho(self) -> float:
        return self.config.selection.rho

    @property
    def deviation(self) -> float | None:
        """Relative gap to the reported cost."""
        reported = self.experiment.reported_gflops
        if reported is None:
            return None
        return (self.report.total_gflops - reported) / reported


def load_experiment(
    path: str | Path, overrides: dict[str, Any] | None = None
) -> tuple[ExperimentSpec, RunConfig]:
    """Split an experiment file into its row metadata and run config.

    Files without an ``experiment`` block are labelled by their stem.
    """
    source = Path(path)
    values = read_run_file(source)
    block = values.pop("experiment", None) or {"label": source.stem}
    try:
        spec = ExperimentSpec(**block)
    except ValidationError as exc:
        msg = f"{source}: bad experiment block: {exc}"
        raise ConfigError(msg) from exc
    return spec, load_run_config(None, deep_merge(values, overrides or {}))


def run_experiment(
    path: str | Path, overrides: dict[str, Any] | None = None, *, solve: bool = True
) -> ExperimentResult:
    """Cost of one row, solving ρ for the reported cost when the row asks for it.

    Pass ``solve=False`` to keep the ρ from the file or `overrides`.
    """
    experiment, cfg = load_experiment(path, overrides)
    if solve and experiment.solve_keep_rate:
        if experiment.reported_gflops is None:
            msg = f"{path}: solve_keep_rate needs reported_gflops"
            raise ConfigError(msg)
        rho = solve_keep_rate(
            experiment.reported_gflops,
            ClipSpec.from_config(cfg.clip),
            cfg.encoder,
            cfg.selection,
            cfg.heads,
            pose_tokens=cfg.pose_tokens,
        )
        cfg = cfg.model_copy(update={"selection": cfg.selection.model_copy(update={"rho": rho})})
    return ExperimentResult(
        name=Path(path).stem,
        experiment=experiment,
        config=cfg,
        report=report_for(cfg, label=experiment.label),
    )


def experiment_files(directory: str | Path = EXPERIMENTS_DIR) -> list[Path]:
    return sorted(Path(directory).glob("*.yaml"))


def cost_table(directory: str | Path = EXPERIMENTS_DIR) -> list[ExperimentResult]:
    files = experiment_files(directory)
    if not files:
        msg = f"No experiment files under {directory}"
        raise ConfigError(msg)
    return [run_experiment(f) for f in files]


def render_cost_table(results: list[ExperimentResult], console: Console) -> None:
    table = Table(title="Analytic cost per configuration")
    table.add_column("Configuration", style="cyan")
    table.add_column("rho", justify="right")
    table.add_column("lambda", justify="right")
    table.add_column("GFLOPs", justify="right")
    table.add_column("Reported", justify="right")
    table.add_column("Gap", justify="right")
    for r in results:
        sel = r.config.selection
        gap = r.deviation
        table.add_row(
            r.experiment.label,
            f"{sel.rho:.3f}",
            f"{sel.lam:.2f}",
            f"{r.report.total_gflops:.1f}",
            "-" if r.experiment.reported_gflops is None else f"{r.experiment.reported_gflops:g}",
            "-" if gap is None else f"{gap:+.1%}" + (" ~" if r.experiment.approximate else ""),
        )
    console.print(table)
