"""Guided Video Transformer - command-line interface.

Subcommands cover the whole workflow: synthesize a dataset, train, evaluate a
checkpoint, account for FLOPs, verify gradients, dump a token-selection map
and sweep keep/merge rates.

Machine-readable results (JSON, CSV paths) go to stdout; logs and tables go
to stderr.

Example:
    Reproduce the cost of the full configuration at reference scale:

        $ guided-vit flops --scale base --pose-tokens --rho 0.6 --lambda 0.3

    Train the toy model on a fresh synthetic dataset:

        $ guided-vit gen-data --out data/synthetic
        $ guided-vit train --data data/synthetic --out runs/toy
"""

from __future__ import annotations

import json
import sys
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import click
import numpy as np
import typer
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from .data import generate_clip, read_dataset, resize_nearest, write_dataset
from .errors import USER_ERRORS, VerificationError
from .flops import (
    cost_table,
    render_cost_table,
    report_for,
    run_experiment,
    solve_keep_rate,
    write_cost_csv,
)
from .harness import (
    ClipSource,
    evaluate,
    load_checkpoint,
    render_metrics,
    sweep,
    train,
    write_bench_csv,
    write_metrics,
)
from .harness.verify import DEFAULT_THRESHOLD, run_gradient_checks
from .logs import setup_logging
from .model import VideoTransformer
from .selection import write_selection_csv
from .settings import RunConfig, get_settings, load_run_config
from .video import ClipSpec

cli_app = typer.Typer(
    name="guided-vit",
    help="Guided Video Transformer - pose-guided token selection for video transformers",
    add_completion=False,
    no_args_is_help=True,
)

console = Console(stderr=True)

ConfigOption = typer.Option(None, "--config", "-c", help="JSON or YAML run config file")
ScaleOption = typer.Option(None, "--scale", help="Preset scale: toy or base")
SeedOption = typer.Option(None, "--seed", help="Master seed")


def _overrides(**values: Any) -> dict[str, Any]:
    """Nested override dict from dotted keys, skipping unset flags."""
    result: dict[str, Any] = {}
    for dotted, value in values.items():
        if value is None:
            continue
        node = result
        *parents, leaf = dotted.split("__")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return result


@dataclass
class _LogFlags:
    """Logging flags given on the command line (None when not passed)."""

    level: str | None = None
    color: bool | None = None


_log_flags = _LogFlags()


def _configure_logging(cfg: RunConfig) -> None:
    level = _log_flags.level or cfg.app.log_level
    color = cfg.app.color if _log_flags.color is None else _log_flags.color
    setup_logging(level, colorize=color)


def _load(config: Optional[Path], **flags: Any) -> RunConfig:
    cfg = load_run_config(config, _overrides(**flags))
    _configure_logging(cfg)
    return cfg


def _emit(payload: Any) -> None:
    typer.echo(json.dumps(payload, indent=2, sort_keys=True, default=str))


@cli_app.callback()
def main(
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Log level [default: app.log_level]"
    ),
    color: Optional[bool] = typer.Option(
        None, "--color/--no-color", help="Colourised logs [default: app.color]"
    ),
) -> None:
    """Configure logging for every subcommand.

    Flags win; otherwise the layered `app` settings apply, re-read once a
    command loads its run config.
    """
    _log_flags.level = log_level
    _log_flags.color = color
    _configure_logging(get_settings())


@cli_app.command("gen-data")
def gen_data(
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Dataset directory"),
    config: Optional[Path] = ConfigOption,
    scale: Optional[str] = ScaleOption,
    seed: Optional[int] = SeedOption,
    classes: Optional[int] = typer.Option(None, "--classes", help="Number of classes"),
    clips_per_class: Optional[int] = typer.Option(None, "--clips-per-class"),
    frames: Optional[int] = typer.Option(None, "--frames", help="Frames per clip"),
    size: Optional[int] = typer.Option(None, "--size", help="Frame side in pixels"),
    persons: Optional[int] = typer.Option(None, "--persons", help="Actors per clip (1 or 2)"),
    imbalance: Optional[float] = typer.Option(None, "--imbalance", help="Per-class size ratio"),
    workers: int = typer.Option(1, "--workers", "-w", help="Generator threads"),
) -> None:
    """Synthesize a labelled clip dataset with keypoint annotations."""
    cfg = _load(
        config,
        scale=scale,
        data__seed=seed,
        data__num_classes=classes,
        data__clips_per_class=clips_per_class,
        data__frames=frames,
        data__size=size,
        data__persons=persons,
        data__imbalance=imbalance,
    )
    root = out or cfg.paths.data_dir
    manifest = write_dataset(root, cfg.data, workers=workers)
    logger.info("Wrote {} clips to {}", len(manifest.clips), root)
    _emit({"root": str(root), "clips": len(manifest.clips), "classes": manifest.classes})


@cli_app.command("train")
def train_cmd(
    data: Optional[Path] = typer.Option(None, "--data", "-d", help="Dataset directory"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Run directory"),
    config: Optional[Path] = ConfigOption,
    scale: Optional[str] = ScaleOption,
    seed: Optional[int] = SeedOption,
    epochs: Optional[int] = typer.Option(None, "--epochs"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Keep rate"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Merge rate"),
    pose_tokens: Optional[bool] = typer.Option(None, "--pose-tokens/--no-pose-tokens"),
) -> None:
    """Train a model and write its checkpoint and training log."""
    cfg = _load(
        config,
        scale=scale,
        seed=seed,
        pose_tokens=pose_tokens,
        optimizer__epochs=epochs,
        selection__rho=rho,
        selection__lambda=lam,
    )
    dataset = read_dataset(data or cfg.paths.data_dir)
    run_dir = out or cfg.paths.runs_dir / "train"
    result = train(cfg, dataset, run_dir)
    last = result.history[-1] if result.history else None
    _emit(
        {
            "checkpoint": str(result.checkpoint),
            "epochs": len(result.history),
            "final": None if last is None else last.model_dump(),
        }
    )


@cli_app.command("eval")
def eval_cmd(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint directory"),
    data: Optional[Path] = typer.Option(None, "--data", "-d", help="Dataset directory"),
    split: str = typer.Option("test", "--split", help="train, test or all"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Directory for metrics files"),
    views: Optional[int] = typer.Option(None, "--views", help="Temporal views per clip"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Evaluation threads"),
) -> None:
    """Evaluate a checkpoint: accuracy, confusion matrix and heatmap error."""
    if not checkpoint.exists():
        msg = f"Checkpoint not found: {checkpoint}"
        raise FileNotFoundError(msg)
    model, cfg = load_checkpoint(checkpoint)
    inference = cfg.inference.model_copy(
        update={
            k: v for k, v in {"temporal_views": views, "workers": workers}.items() if v is not None
        }
    )
    cfg = cfg.model_copy(update={"inference": inference})
    dataset = read_dataset(data or cfg.paths.data_dir)
    report, _ = evaluate(model, dataset, cfg, split)
    render_metrics(report, dataset.manifest.classes, console)
    if out is not None:
        write_metrics(report, out)
    _emit(report.model_dump())


@cli_app.command("flops")
def flops_cmd(
    config: Optional[Path] = ConfigOption,
    scale: Optional[str] = ScaleOption,
    pose_tokens: Optional[bool] = typer.Option(None, "--pose-tokens/--no-pose-tokens"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Keep rate"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Merge rate"),
    target_gflops: Optional[float] = typer.Option(
        None, "--target-gflops", help="Solve the keep rate for this cost"
    ),
    csv_path: Optional[Path] = typer.Option(None, "--csv", help="Per-layer CSV output"),
    table: bool = typer.Option(False, "--table", help="Cost of every shipped experiment"),
) -> None:
    """Analytic cost of one forward pass, as JSON."""
    if table:
        results = cost_table()
        render_cost_table(results, console)
        _emit(
            [
                {
                    "name": r.name,
                    "label": r.experiment.label,
                    "rho": r.rho,
                    "gflops": round(r.report.total_gflops, 3),
                    "reported_gflops": r.experiment.reported_gflops,
                }
                for r in results
            ]
        )
        return

    flags = _overrides(
        scale=scale, pose_tokens=pose_tokens, selection__rho=rho, selection__lambda=lam
    )
    if config is not None:
        cfg = run_experiment(config, flags, solve=rho is None).config
    else:
        cfg = load_run_config(config, flags)
    _configure_logging(cfg)
    if target_gflops is not None:
        solved = solve_keep_rate(
            target_gflops,
            ClipSpec.from_config(cfg.clip),
            cfg.encoder,
            cfg.selection,
            cfg.heads,
            pose_tokens=cfg.pose_tokens,
        )
        cfg = cfg.model_copy(update={"selection": cfg.selection.model_copy(update={"rho": solved})})
        logger.info("Keep rate for {} GFLOPs: {:.4f}", target_gflops, solved)

    report = report_for(cfg)
    if csv_path is not None:
        write_cost_csv(report, csv_path)
    payload = report.summary()
    payload["rho"] = cfg.selection.rho
    payload["lambda"] = cfg.selection.lam
    _emit(payload)


@cli_app.command("gradcheck")
def gradcheck_cmd(
    threshold: float = typer.Option(DEFAULT_THRESHOLD, "--threshold"),
    seed: int = typer.Option(0, "--seed"),
    max_elements: int = typer.Option(12, "--max-elements", help="Samples per model tensor"),
) -> None:
    """Finite-difference check of every differentiable op and the toy model."""
    results = run_gradient_checks(threshold=threshold, seed=seed, max_elements=max_elements)
    table = Table(title=f"Gradient checks (threshold {threshold:g})")
    table.add_column("Check", style="cyan")
    table.add_column("Max rel. error", justify="right")
    table.add_column("Status")
    for r in results:
        table.add_row(
            r.name,
            f"{r.max_rel_error:.2e}",
            "[green]ok[/green]" if r.passed else "[red]FAIL[/red]",
        )
    console.print(table)
    _emit({r.name: r.max_rel_error for r in results})
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise VerificationError(f"Gradient checks above threshold: {', '.join(failed)}")


@cli_app.command("demo-select")
def demo_select(
    dump_selection: Path = typer.Option(
        Path("selection.csv"), "--dump-selection", help="Per-stage token status CSV"
    ),
    config: Optional[Path] = ConfigOption,
    scale: Optional[str] = ScaleOption,
    seed: Optional[int] = SeedOption,
    checkpoint: Optional[Path] = typer.Option(None, "--checkpoint", help="Trained weights"),
    data: Optional[Path] = typer.Option(None, "--data", "-d", help="Take the first test clip"),
    label: int = typer.Option(0, "--label", help="Class of the synthesized clip"),
    rho: Optional[float] = typer.Option(None, "--rho", help="Keep rate"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Merge rate"),
) -> None:
    """Run one clip through the model and dump which tokens each stage kept."""
    if checkpoint is not None:
        model, cfg = load_checkpoint(checkpoint)
        update = _overrides(rho=rho, lam=lam)
        if update:
            cfg = cfg.model_copy(update={"selection": cfg.selection.model_copy(update=update)})
    else:
        cfg = _load(config, scale=scale, seed=seed, selection__rho=rho, selection__lambda=lam)
        model = VideoTransformer.from_config(cfg)

    if data is not None:
        dataset = read_dataset(data)
        entries = dataset.entries("test") or dataset.entries("all")
        source = ClipSource(dataset, cfg)
        entry = entries[0]
        clip = source.window(entry, source.starts(entry, 1)[0])
    else:
        spec = ClipSpec.from_config(cfg.clip)
        synthetic = cfg.data.model_copy(
            update={
                "frames": spec.frames,
                "size": spec.height,
                "num_classes": max(label + 1, cfg.data.num_classes),
            }
        )
        clip = generate_clip(synthetic, label, cfg.seed).clip
        clip = resize_nearest(clip, spec.height, spec.width)

    out = model(np.asarray(clip), cfg.selection)
    write_selection_csv(out.outcomes, dump_selection)
    _emit(
        {
            "csv": str(dump_selection),
            "visual_counts": out.visual_counts,
            "stages": [
                {
                    "layer": o.layer,
                    "kept": int(o.kept.size),
                    "merged": o.n_merged,
                    "dropped": int(o.dropped.size),
                    "after": o.n_after,
                }
                for o in out.outcomes
            ],
        }
    )


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        msg = f"Expected comma-separated numbers, got {text!r}"
        raise typer.BadParameter(msg) from exc


@cli_app.command("bench")
def bench_cmd(
    rhos: str = typer.Option("0.4,0.5,0.6,0.7,0.8,0.9,1.0", "--rhos", help="Keep rates"),
    lambdas: str = typer.Option("0.1,0.3", "--lambdas", help="Merge rates"),
    out: Path = typer.Option(Path("bench.csv"), "--out", "-o", help="CSV output"),
    config: Optional[Path] = ConfigOption,
    scale: Optional[str] = ScaleOption,
    cost_scale: Optional[str] = typer.Option(
        None, "--cost-scale", help="Scale for the cost axis (defaults to --scale)"
    ),
    do_train: bool = typer.Option(False, "--train", help="Train a model per grid point"),
    data: Optional[Path] = typer.Option(None, "--data", "-d", help="Dataset for --train"),
) -> None:
    """Sweep keep and merge rates: cost for every point, accuracy with --train."""
    cfg = _load(config, scale=scale)
    cost_cfg = None
    if cost_scale is not None:
        cost_cfg = _load(config, scale=cost_scale)
    dataset = read_dataset(data or cfg.paths.data_dir) if do_train else None
    rows = sweep(cfg, _floats(rhos), _floats(lambdas), cost_cfg=cost_cfg, dataset=dataset)
    write_bench_csv(rows, out)
    _emit({"csv": str(out), "rows": [r.model_dump() for r in rows]})


def run(argv: Sequence[str] | None = None) -> int:
    """Invoke the CLI and map failures onto exit codes (0 ok, 1 user error, 2 internal)."""
    try:
        result = cli_app(
            args=list(argv) if argv is not None else None,
            prog_name="guided-vit",
            standalone_mode=False,
        )
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        logger.error("Aborted")
        return 1
    except (*USER_ERRORS, ValidationError, FileNotFoundError) as exc:
        logger.error("{}: {}", type(exc).__name__, exc)
        return 1
    except Exception as exc:
        logger.opt(exception=exc).error("Internal error: {}", exc)
        return 2
    return result if isinstance(result, int) else 0


def cli() -> None:
    """Console-script entry point."""
    sys.exit(run())


if __name__ == "__main__":
    cli()
