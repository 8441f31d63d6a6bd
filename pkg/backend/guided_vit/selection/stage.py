"""One selection stage: prune the visual tokens, merge the discarded ones."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..encoder import AttentionRecord
from ..settings import MergeScope, SelectionConfig
from ..tensor import gather_rows, split
from ..video import TokenBatch
from .merging import MergeResult, concat_rows, get_merger
from .scoring import keep_count, prune_scores, topk_prune

STATUS_KEPT = "kept"
STATUS_SOURCE = "merged-source"
STATUS_CANDIDATE = "merged-candidate"
STATUS_PASSTHROUGH = "passthrough"
STATUS_DROPPED = "dropped"

CSV_HEADER = ("stage", "t", "row", "col", "status")


@dataclass
class SelectionOutcome:
    """What a selection stage did to the visual tokens it received.

    Index arrays refer to positions in the visual part of the incoming batch.
    """

    layer: int
    kept: np.ndarray
    sources: np.ndarray
    candidates: np.ndarray
    dropped: np.ndarray
    passthrough: np.ndarray
    previous_origin: np.ndarray
    batch: TokenBatch
    merge_skipped: bool = False

    @property
    def n_before(self) -> int:
        return self.previous_origin.shape[0]

    @property
    def n_after(self) -> int:
        return self.batch.n_visual

    @property
    def n_merged(self) -> int:
        return self.n_after - self.kept.size

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(int(s), int(c)) for s, c in zip(self.sources, self.candidates, strict=True)]

    def statuses(self) -> list[str]:
        """Status of every incoming visual token; sources win over candidates."""
        status = np.full(self.n_before, STATUS_DROPPED, dtype=object)
        status[self.passthrough] = STATUS_PASSTHROUGH
        status[self.candidates] = STATUS_CANDIDATE
        status[self.sources] = STATUS_SOURCE
        status[self.kept] = STATUS_KEPT
        return [str(s) for s in status]


def stage_output_count(n_visual: int, cfg: SelectionConfig) -> int:
    """Visual tokens left after one stage, by the same rules `apply_selection` uses."""
    merger = get_merger(cfg.merge_policy)
    if cfg.merge_scope is MergeScope.ALL:
        if merger is None:
            return n_visual
        out = merger.output_count(n_visual, cfg.lam)
        return out if out else n_visual
    kept = keep_count(n_visual, cfg.rho)
    discarded = n_visual - kept
    if merger is None:
        return kept
    return kept + merger.output_count(discarded, cfg.lam)


def stage_counts(n_visual: int, cfg: SelectionConfig, n_stages: int) -> list[int]:
    """Visual counts before the first stage and after each of `n_stages` stages."""
    counts = [n_visual]
    for _ in range(n_stages):
        counts.append(stage_output_count(counts[-1], cfg))
    return counts


def _identity(batch: TokenBatch, layer: int) -> SelectionOutcome:
    empty = np.zeros(0, dtype=np.int64)
    return SelectionOutcome(
        layer=layer,
        kept=np.arange(batch.n_visual),
        sources=empty,
        candidates=empty,
        dropped=empty,
        passthrough=empty,
        previous_origin=batch.visual_origin,
        batch=batch,
        merge_skipped=True,
    )


def apply_selection(
    batch: TokenBatch, record: AttentionRecord, cfg: SelectionConfig
) -> tuple[TokenBatch, SelectionOutcome]:
    """Prune and merge the visual tokens of `batch` after `record.layer`.

    The new order is class, pose, kept visual tokens (original order), then the
    merge output. Class and pose tokens pass through untouched.
    """
    if cfg.is_identity:
        return batch, _identity(batch, record.layer)

    n_sem, n_vis = batch.n_semantic, batch.n_visual
    if cfg.merge_scope is MergeScope.ALL:
        kept = np.zeros(0, dtype=np.int64)
        discarded = np.arange(n_vis)
    elif cfg.rho == 1.0:
        kept = np.arange(n_vis)
        discarded = np.zeros(0, dtype=np.int64)
    else:
        kept, discarded = topk_prune(prune_scores(record, batch, cfg), cfg.rho)

    head, visual = split(batch.tokens, [n_sem, n_vis])
    merger = get_merger(cfg.merge_policy)
    if merger is None or discarded.size == 0:
        result = MergeResult(tokens=None, skipped=True)
    else:
        features = record.feature(cfg.similarity_feature)[n_sem + discarded]
        result = merger.merge(gather_rows(visual, discarded), features, cfg.lam)

    if cfg.merge_scope is MergeScope.ALL and result.tokens is None:
        return batch, _identity(batch, record.layer)

    kept_tokens = gather_rows(visual, kept) if kept.size else None
    new_visual = concat_rows([kept_tokens, result.tokens])
    parts = [head] if new_visual is None else [head, new_visual]
    tokens = concat_rows(parts)

    origin_rows = discarded[result.origin_rows]
    new_origin = np.concatenate([batch.visual_origin[kept], batch.visual_origin[origin_rows]])
    new_merged = np.concatenate([batch.merged[kept], result.merged_rows])

    accounted = np.concatenate(
        [
            kept,
            discarded[result.sources],
            discarded[result.candidates],
            discarded[result.passthrough],
        ]
    )
    dropped = np.setdiff1d(np.arange(n_vis), accounted)

    alive = np.zeros_like(batch.alive_mask)
    new_batch = TokenBatch(
        tokens=tokens,
        n_pose=batch.n_pose,
        visual_origin=new_origin,
        merged=new_merged,
        alive_mask=alive,
        grid=batch.grid,
    )
    alive[new_batch.origin_index()] = True

    outcome = SelectionOutcome(
        layer=record.layer,
        kept=kept,
        sources=discarded[result.sources],
        candidates=discarded[result.candidates],
        dropped=dropped,
        passthrough=discarded[result.passthrough],
        previous_origin=batch.visual_origin,
        batch=new_batch,
        merge_skipped=result.skipped,
    )
    return new_batch, outcome


def selection_rows(outcomes: Iterable[SelectionOutcome]) -> list[tuple[int, int, int, int, str]]:
    rows: list[tuple[int, int, int, int, str]] = []
    for stage, outcome in enumerate(outcomes, start=1):
        for (t, r, c), status in zip(outcome.previous_origin, outcome.statuses(), strict=True):
            rows.append((stage, int(t), int(r), int(c), status))
    return rows


def write_selection_csv(outcomes: Sequence[SelectionOutcome], path: str | Path) -> Path:
    """Per-stage token status table (stage, t, row, col, status)."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        writer.writerows(selection_rows(outcomes))
    return target
