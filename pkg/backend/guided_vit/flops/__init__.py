"""Analytic FLOP accounting."""

from .cost_model import (
    classifier_flops,
    decoder_flops,
    embed_flops,
    layer_cost,
    layer_flops,
    model_flops,
    report_for,
    solve_keep_rate,
    write_cost_csv,
)
from .experiments import (
    ExperimentResult,
    ExperimentSpec,
    cost_table,
    experiment_files,
    load_experiment,
    render_cost_table,
    run_experiment,
)

__all__ = [
    "ExperimentResult",
    "ExperimentSpec",
    "classifier_flops",
    "cost_table",
    "decoder_flops",
    "embed_flops",
    "experiment_files",
    "layer_cost",
    "layer_flops",
    "load_experiment",
    "model_flops",
    "render_cost_table",
    "report_for",
    "run_experiment",
    "solve_keep_rate",
    "write_cost_csv",
]
