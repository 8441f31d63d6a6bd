"""Merging of discarded tokens.

Two strategies share the `BaseMerger` interface:

* `PoguiseMerger` compares every pair of tokens, lets each token pick its most
  similar peer, and averages the K best-matched (source, candidate) pairs.
  Everything else in the input is dropped, so the output has exactly K rows
  for any rate in (0, 1].
* `BipartiteMerger` splits tokens into alternating sets A and B, matches each
  A token to its closest B token, and folds the r best matches into B. The
  output keeps every unmatched token, which caps removal at half the input.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from ..settings import MergePolicy
from ..tensor import Tensor, add, concat, gather_rows, matmul, scale
from .scoring import round_count

_EMPTY = np.zeros(0, dtype=np.int64)


def cosine_similarity(features: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity; zero-norm rows compare as 0."""
    f = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(f, axis=1, keepdims=True)
    unit = np.divide(f, norms, out=np.zeros_like(f), where=norms > 0)
    return unit @ unit.T


@dataclass
class MergeResult:
    """Outcome of merging one token set.

    Attributes:
        tokens: Output rows, or None when nothing survives the merge step.
        sources: Input positions folded into a partner.
        candidates: Partner of each source, aligned with `sources`.
        passthrough: Input positions carried through unchanged.
        origin_rows: For each output row, the input position whose origin it
            inherits.
        merged_rows: For each output row, whether it is an average.
        skipped: The merge was a no-op (too few tokens).
    """

    tokens: Tensor | None
    sources: np.ndarray = field(default_factory=lambda: _EMPTY)
    candidates: np.ndarray = field(default_factory=lambda: _EMPTY)
    passthrough: np.ndarray = field(default_factory=lambda: _EMPTY)
    origin_rows: np.ndarray = field(default_factory=lambda: _EMPTY)
    merged_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    skipped: bool = False

    @property
    def n_out(self) -> int:
        return 0 if self.tokens is None else self.tokens.shape[0]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(int(s), int(c)) for s, c in zip(self.sources, self.candidates, strict=True)]


class BaseMerger(ABC):
    """Merge strategy over a set of token rows."""

    policy: MergePolicy

    @abstractmethod
    def output_count(self, n: int, lam: float) -> int:
        """Rows produced from `n` inputs (must agree with `merge`)."""

    @abstractmethod
    def merge(self, x: Tensor, features: np.ndarray, lam: float) -> MergeResult:
        """Merge the rows of `x` using per-row similarity `features`."""

    @staticmethod
    def _check(x: Tensor, features: np.ndarray) -> None:
        if features.ndim != 2 or features.shape[0] != x.shape[0]:
            msg = f"{features.shape[0]} feature rows for {x.shape[0]} tokens"
            raise ShapeError(msg)


class PoguiseMerger(BaseMerger):
    policy = MergePolicy.POGUISE

    @staticmethod
    def merge_count(n: int, lam: float) -> int:
        if n < 2:
            return 0
        return min(n, round_count(n * lam))

    def output_count(self, n: int, lam: float) -> int:
        return self.merge_count(n, lam)

    def merge(self, x: Tensor, features: np.ndarray, lam: float) -> MergeResult:
        self._check(x, features)
        n = x.shape[0]
        if n < 2:
            return MergeResult(tokens=None, skipped=True)

        sim = cosine_similarity(features)
        np.fill_diagonal(sim, -np.inf)
        candidate = sim.argmax(axis=1)
        best = sim[np.arange(n), candidate]

        k = self.merge_count(n, lam)
        sources = np.sort(np.argsort(-best, kind="stable")[:k])
        candidates = candidate[sources]
        tokens = scale(add(gather_rows(x, sources), gather_rows(x, candidates)), 0.5)
        return MergeResult(
            tokens=tokens,
            sources=sources,
            candidates=candidates,
            origin_rows=sources,
            merged_rows=np.ones(k, dtype=bool),
        )


class BipartiteMerger(BaseMerger):
    policy = MergePolicy.BIPARTITE

    @staticmethod
    def removal_count(n: int, lam: float) -> int:
        """Rows removed from `n` inputs; more than half is rejected."""
        if n < 2:
            return 0
        r = round_count(n * lam)
        if r > n // 2:
            msg = (
                f"Bipartite merging removes at most half its input: "
                f"lambda={lam} asks for {r} of {n}"
            )
            raise ConfigError(msg)
        return r

    def output_count(self, n: int, lam: float) -> int:
        return n - self.removal_count(n, lam)

    def merge(self, x: Tensor, features: np.ndarray, lam: float) -> MergeResult:
        self._check(x, features)
        n = x.shape[0]
        r = self.removal_count(n, lam)
        if r == 0:
            everything = np.arange(n)
            return MergeResult(
                tokens=x if n else None,
                passthrough=everything,
                origin_rows=everything,
                merged_rows=np.zeros(n, dtype=bool),
                skipped=True,
            )

        a_set = np.arange(0, n, 2)
        b_set = np.arange(1, n, 2)
        sim = cosine_similarity(features)[np.ix_(a_set, b_set)]
        match = sim.argmax(axis=1)
        best = sim[np.arange(a_set.size), match]
        chosen = np.sort(np.argsort(-best, kind="stable")[:r])
        unmerged = np.setdiff1d(np.arange(a_set.size), chosen)

        # rows: unmerged A, then every B (each B averaged with the A rows folded into it)
        n_out = unmerged.size + b_set.size
        weights = np.zeros((n_out, n))
        weights[np.arange(unmerged.size), a_set[unmerged]] = 1.0
        groups = np.ones(b_set.size)
        np.add.at(groups, match[chosen], 1.0)
        rows_b = unmerged.size + np.arange(b_set.size)
        weights[rows_b, b_set] = 1.0 / groups
        weights[unmerged.size + match[chosen], a_set[chosen]] = 1.0 / groups[match[chosen]]

        tokens = matmul(Tensor(weights, dtype=x.dtype), x)
        targets = b_set[match[chosen]]
        return MergeResult(
            tokens=tokens,
            sources=a_set[chosen],
            candidates=targets,
            passthrough=np.concatenate([a_set[unmerged], np.setdiff1d(b_set, targets)]),
            origin_rows=np.concatenate([a_set[unmerged], b_set]),
            merged_rows=np.concatenate([np.zeros(unmerged.size, dtype=bool), groups > 1]),
        )


MERGERS: dict[MergePolicy, BaseMerger] = {
    MergePolicy.POGUISE: PoguiseMerger(),
    MergePolicy.BIPARTITE: BipartiteMerger(),
}


def get_merger(policy: MergePolicy) -> BaseMerger | None:
    """Merger registered for `policy` (None for NONE)."""
    return MERGERS.get(policy)


def poguise_merge(x_disc: Tensor, features: np.ndarray, lam: float) -> MergeResult:
    return MERGERS[MergePolicy.POGUISE].merge(x_disc, features, lam)


def bipartite_merge(x_disc: Tensor, features: np.ndarray, lam: float) -> MergeResult:
    return MERGERS[MergePolicy.BIPARTITE].merge(x_disc, features, lam)


def concat_rows(parts: list[Tensor | None]) -> Tensor | None:
    present = [p for p in parts if p is not None and p.shape[0] > 0]
    if not present:
        return None
    return present[0] if len(present) == 1 else concat(present)
