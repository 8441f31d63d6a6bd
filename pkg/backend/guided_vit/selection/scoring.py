"""Attention-based pruning scores and top-k keep sets."""

from __future__ import annotations

import math

import numpy as np
from loguru import logger

from ..encoder import AttentionRecord
from ..errors import ConfigError, ShapeError
from ..settings import ScorePolicy, SelectionConfig
from ..video import TokenBatch


def round_count(value: float) -> int:
    """Nearest integer with halves rounded down, never below 1."""
    return max(1, math.ceil(value - 0.5))


def keep_count(n_visual: int, rho: float) -> int:
    """N_sel for `n_visual` alive tokens."""
    if n_visual <= 0:
        return 0
    return min(n_visual, round_count(n_visual * rho))


def prune_scores(record: AttentionRecord, batch: TokenBatch, cfg: SelectionConfig) -> np.ndarray:
    """Score each alive visual token by the attention it pays to guide tokens.

    Returns:
        One score per visual token, in batch order.

    Raises:
        ConfigError: CLASS_POSE scoring on a batch without pose tokens.
        ShapeError: Attention size does not match the batch.
    """
    if record.n_tokens != batch.n_tokens:
        msg = f"Attention over {record.n_tokens} tokens, batch has {batch.n_tokens}"
        raise ShapeError(msg)
    n_sem = batch.n_semantic
    attn_vis = record.attn[n_sem:]

    if cfg.score_policy is ScorePolicy.CLASS:
        return attn_vis[:, 0].copy()

    if cfg.score_policy is ScorePolicy.CLASS_POSE:
        if batch.n_pose == 0:
            raise ConfigError("CLASS_POSE scoring needs pose tokens")
        kappa = float(cfg.kappa)
        pose_attn = attn_vis[:, 1:n_sem].sum(axis=1)
        return attn_vis[:, 0] * kappa + pose_attn * (1.0 - kappa)

    t_grid = batch.grid[0]
    mid = np.flatnonzero(batch.visual_origin[:, 0] == t_grid // 2)
    if mid.size == 0:
        logger.warning("No alive middle-frame tokens at layer {}; scores are zero", record.layer)
        return np.zeros(batch.n_visual, dtype=record.attn.dtype)
    return attn_vis[:, n_sem + mid].sum(axis=1)


def topk_prune(scores: np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Split positions into the N_sel highest scores and the rest.

    Ties go to the lower index; both index arrays come back ascending.
    """
    values = np.asarray(scores).reshape(-1)
    n_sel = keep_count(values.size, rho)
    order = np.argsort(-values, kind="stable")
    return np.sort(order[:n_sel]), np.sort(order[n_sel:])
