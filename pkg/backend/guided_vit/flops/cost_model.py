"""Analytic FLOP model.

Convention: one multiply-accumulate counts as 2 FLOPs; normalisation,
softmax and activation functions are not counted. All totals are exact
Python integers.
"""

from __future__ import annotations

import csv
from pathlib import Path

from loguru import logger

from ..errors import ConfigError
from ..schemas import CostReport, LayerCost
from ..selection import stage_counts
from ..settings import EncoderConfig, HeadConfig, RunConfig, ScorePolicy, SelectionConfig
from ..video import ClipSpec

GIGA = 1e9
DECONV_KERNEL = 4


def layer_flops(n: int, d: int, mlp_ratio: int = 4) -> int:
    """FLOPs of one block over n tokens of width d: 2·(12·N·D² + 2·N²·D) at ratio 4."""
    return layer_cost(1, n, d, mlp_ratio).total


def layer_cost(layer: int, n: int, d: int, mlp_ratio: int = 4) -> LayerCost:
    projections = 4 * n * d * d
    scores = 2 * n * n * d
    mlp = 2 * mlp_ratio * n * d * d
    return LayerCost(
        layer=layer,
        tokens=n,
        attention_flops=2 * (projections + scores),
        mlp_flops=2 * mlp,
    )


def embed_flops(spec: ClipSpec, d: int) -> int:
    return 2 * spec.n_vis * spec.cube_size * d


def classifier_flops(d: int, num_classes: int) -> int:
    return 2 * (d * d + d * num_classes)


def decoder_flops(h: int, w: int, d: int, hidden: int, landmarks: int) -> int:
    """Deconvolutions counted on their output grids, plus the 1×1 projection."""
    k2 = DECONV_KERNEL * DECONV_KERNEL
    first = d * hidden * k2 * (2 * h) * (2 * w)
    second = hidden * hidden * k2 * (4 * h) * (4 * w)
    projection = hidden * landmarks * (4 * h) * (4 * w)
    return 2 * (first + second + projection)


def _validate(enc: EncoderConfig, sel: SelectionConfig, pose_tokens: bool) -> tuple[int, ...]:
    if sel.is_identity:
        return ()
    stages = sel.stages_for(enc)
    if any(s < 1 or s > enc.depth for s in stages):
        msg = f"Selection stages {stages} outside 1..{enc.depth}"
        raise ConfigError(msg)
    if sel.score_policy is ScorePolicy.CLASS_POSE and not pose_tokens and sel.rho < 1.0:
        raise ConfigError("CLASS_POSE scoring needs pose tokens")
    return stages


def model_flops(
    spec: ClipSpec,
    enc: EncoderConfig,
    sel: SelectionConfig,
    heads: HeadConfig,
    *,
    pose_tokens: bool = True,
    label: str = "",
) -> CostReport:
    """Cost of one forward pass, following the selection counting rules layer by layer.

    Raises:
        ConfigError: If the selection settings cannot apply to this encoder.
    """
    stages = _validate(enc, sel, pose_tokens)
    visual = stage_counts(spec.n_vis, sel, len(stages))
    n_pose = spec.n_pose if pose_tokens else 0

    layers: list[LayerCost] = []
    counts: list[int] = []
    done = 0
    for layer in range(1, enc.depth + 1):
        n = 1 + n_pose + visual[done]
        counts.append(n)
        layers.append(layer_cost(layer, n, enc.dim, enc.mlp_ratio))
        if layer in stages:
            done += 1

    embed = embed_flops(spec, enc.dim)
    head = classifier_flops(enc.dim, heads.num_classes)
    decoder = (
        decoder_flops(spec.h, spec.w, enc.dim, heads.decoder_width(enc.dim), heads.landmarks)
        if pose_tokens
        else 0
    )
    total = sum(c.total for c in layers) + embed + head + decoder
    return CostReport(
        label=label,
        token_counts=counts,
        layers=layers,
        embed_flops=embed,
        head_flops=head,
        decoder_flops=decoder,
        total_flops=total,
    )


def report_for(cfg: RunConfig, label: str = "") -> CostReport:
    return model_flops(
        ClipSpec.from_config(cfg.clip),
        cfg.encoder,
        cfg.selection,
        cfg.heads,
        pose_tokens=cfg.pose_tokens,
        label=label,
    )


def solve_keep_rate(
    target_gflops: float,
    spec: ClipSpec,
    enc: EncoderConfig,
    sel: SelectionConfig,
    heads: HeadConfig,
    *,
    pose_tokens: bool = True,
    tolerance: float = 0.005,
    iterations: int = 60,
) -> float:
    """Bisect ρ so the model costs `target_gflops` (within `tolerance`, relative).

    Cost is non-decreasing in ρ, so the smallest ρ reaching the target is
    returned; a target at or above the ρ=1 cost gives 1.

    Raises:
        ConfigError: If the target lies below the cheapest reachable cost or
            cannot be matched within tolerance.
    """

    def cost(rho: float) -> float:
        trial = sel.model_copy(update={"rho": rho})
        return model_flops(spec, enc, trial, heads, pose_tokens=pose_tokens).total_gflops

    if target_gflops >= cost(1.0):
        return 1.0
    lo, hi = 1e-6, 1.0
    if cost(lo) > target_gflops:
        msg = f"Target {target_gflops} GFLOPs is below the minimum {cost(lo):.1f}"
        raise ConfigError(msg)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if cost(mid) >= target_gflops:
            hi = mid
        else:
            lo = mid

    reached = cost(hi)
    if abs(reached - target_gflops) > tolerance * target_gflops:
        msg = f"Closest reachable cost {reached:.2f} misses target {target_gflops} GFLOPs"
        raise ConfigError(msg)
    logger.debug("solve_keep_rate: target {} GFLOPs -> rho={:.4f}", target_gflops, hi)
    return hi


def write_cost_csv(report: CostReport, path: str | Path) -> Path:
    """Per-layer breakdown followed by the embed/head/decoder/total lines."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["part", "tokens", "attention_flops", "mlp_flops", "flops"])
        for c in report.layers:
            writer.writerow([f"layer{c.layer}", c.tokens, c.attention_flops, c.mlp_flops, c.total])
        writer.writerow(["embed", "", "", "", report.embed_flops])
        writer.writerow(["head", "", "", "", report.head_flops])
        writer.writerow(["decoder", "", "", "", report.decoder_flops])
        writer.writerow(["total", "", "", "", report.total_flops])
    return target
