"""Unit tests for pruning scores, top-k selection, merging and selection stages."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from backend.guided_vit.encoder import AttentionRecord
from backend.guided_vit.errors import ConfigError
from backend.guided_vit.model import VideoTransformer
from backend.guided_vit.selection import (
    CSV_HEADER,
    BipartiteMerger,
    apply_selection,
    bipartite_merge,
    keep_count,
    poguise_merge,
    prune_scores,
    round_count,
    stage_counts,
    topk_prune,
    write_selection_csv,
)
from backend.guided_vit.settings import (
    EncoderConfig,
    HeadConfig,
    MergePolicy,
    MergeScope,
    ScorePolicy,
    SelectionConfig,
)
from backend.guided_vit.tensor import Tensor, no_grad, sum_all
from backend.guided_vit.video import ClipSpec, TokenBatch, TokenizerParams, cube_embed


def _stochastic(rng: np.random.Generator, n: int) -> np.ndarray:
    logits = rng.normal(size=(n, n))
    weights = np.exp(logits)
    return weights / weights.sum(axis=1, keepdims=True)


def _flat_batch(n_pose: int, n_visual: int, dim: int = 4) -> TokenBatch:
    origin = np.stack(
        [np.zeros(n_visual), np.zeros(n_visual), np.arange(n_visual)], axis=1
    ).astype(np.int64)
    return TokenBatch(
        tokens=Tensor(np.zeros((1 + n_pose + n_visual, dim))),
        n_pose=n_pose,
        visual_origin=origin,
        merged=np.zeros(n_visual, dtype=bool),
        alive_mask=np.ones(n_visual, dtype=bool),
        grid=(1, 1, n_visual),
    )


@pytest.fixture
def toy_batch(f64: None, rng: np.random.Generator) -> TokenBatch:
    """8 visual tokens on a (2, 2, 2) grid with 4 pose tokens."""
    spec = ClipSpec(frames=4, channels=1, height=32, width=32)
    params = TokenizerParams.init(spec, 8, rng, std=0.1)
    return cube_embed(rng.normal(size=spec.dims), spec, params)


class TestScores:
    def test_class_pose_formula(self) -> None:
        batch = _flat_batch(n_pose=2, n_visual=1)
        attn = np.eye(4)
        attn[3] = [0.2, 0.1, 0.3, 0.4]
        record = AttentionRecord(attn=attn, layer=1)

        scores = prune_scores(record, batch, SelectionConfig(kappa=0.5))

        assert scores == pytest.approx([0.30], abs=1e-12)

    def test_kappa_one_equals_class_policy(self, rng: np.random.Generator) -> None:
        batch = _flat_batch(n_pose=3, n_visual=12)
        record = AttentionRecord(attn=_stochastic(rng, 16), layer=1)

        class_pose = prune_scores(record, batch, SelectionConfig(kappa=1.0))
        class_only = prune_scores(record, batch, SelectionConfig(score_policy=ScorePolicy.CLASS))

        assert np.array_equal(class_pose, class_only)

    def test_matches_direct_loop(self, rng: np.random.Generator) -> None:
        batch = _flat_batch(n_pose=3, n_visual=12)
        attn = _stochastic(rng, 16)
        kappa = 0.3

        scores = prune_scores(
            AttentionRecord(attn=attn, layer=1), batch, SelectionConfig(kappa=kappa)
        )

        expected = []
        for i in range(4, 16):
            pose = 0.0
            for j in range(1, 4):
                pose += attn[i, j]
            expected.append(attn[i, 0] * kappa + pose * (1 - kappa))
        assert np.max(np.abs(scores - np.array(expected))) < 1e-12

    def test_midframe_sums_middle_frame_columns(
        self, toy_batch: TokenBatch, rng: np.random.Generator
    ) -> None:
        attn = _stochastic(rng, toy_batch.n_tokens)
        cfg = SelectionConfig(score_policy=ScorePolicy.MIDFRAME)

        scores = prune_scores(AttentionRecord(attn=attn, layer=1), toy_batch, cfg)

        n_sem = toy_batch.n_semantic
        middle = [n_sem + k for k, o in enumerate(toy_batch.visual_origin) if o[0] == 1]
        assert len(middle) == 4
        assert np.allclose(scores, attn[n_sem:][:, middle].sum(axis=1), atol=1e-12)

    def test_class_pose_without_pose_tokens(self, rng: np.random.Generator) -> None:
        batch = _flat_batch(n_pose=0, n_visual=5)
        record = AttentionRecord(attn=_stochastic(rng, 6), layer=1)
        with pytest.raises(ConfigError):
            prune_scores(record, batch, SelectionConfig())


class TestTopk:
    def test_keeps_largest_scores(self) -> None:
        kept, discarded = topk_prune(np.array([0.5, 0.1, 0.4, 0.2]), 0.5)

        assert kept.tolist() == [0, 2]
        assert discarded.tolist() == [1, 3]

    def test_full_keep_rate(self) -> None:
        kept, discarded = topk_prune(np.array([0.5, 0.1, 0.4, 0.2]), 1.0)

        assert kept.tolist() == [0, 1, 2, 3]
        assert discarded.size == 0

    def test_ties_go_to_lower_index(self) -> None:
        kept, _ = topk_prune(np.ones(6), 0.5)
        assert kept.tolist() == [0, 1, 2]

    @pytest.mark.parametrize(
        ("value", "expected"), [(940.8, 941), (188.1, 188), (97.5, 97), (0.4, 1), (2.5, 2)]
    )
    def test_round_count(self, value: float, expected: int) -> None:
        assert round_count(value) == expected

    def test_reference_keep_count(self) -> None:
        assert keep_count(1568, 0.6) == 941

    def test_scaling_scores_keeps_the_same_set(self, rng: np.random.Generator) -> None:
        scores = rng.random(40)
        assert np.array_equal(topk_prune(scores, 0.3)[0], topk_prune(scores * 3.7, 0.3)[0])

    def test_monotone_containment(self, rng: np.random.Generator) -> None:
        scores = np.round(rng.random(50), 1)
        previous: set[int] = set()
        for rho in np.linspace(0.05, 1.0, 20):
            kept = set(topk_prune(scores, float(rho))[0].tolist())
            assert previous <= kept
            previous = kept


def _poguise_oracle(x: np.ndarray, f: np.ndarray, k: int) -> tuple[list[int], list[int]]:
    n = len(f)
    norms = [float(np.linalg.norm(row)) for row in f]
    best = []
    for i in range(n):
        top_j, top_s = -1, -np.inf
        for j in range(n):
            if j == i:
                continue
            s = float(f[i] @ f[j]) / (norms[i] * norms[j])
            if s > top_s:
                top_j, top_s = j, s
        best.append((top_s, i, top_j))
    ranked = sorted(best, key=lambda item: (-item[0], item[1]))[:k]
    chosen = sorted(ranked, key=lambda item: item[1])
    return [i for _, i, _ in chosen], [j for _, _, j in chosen]


class TestPoguiseMerge:
    def test_tie_goes_to_first_source(self, f64: None, rng: np.random.Generator) -> None:
        x = Tensor(rng.normal(size=(3, 4)))
        features = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

        result = poguise_merge(x, features, 0.3)

        assert result.pairs == [(0, 1)]
        assert result.tokens is not None
        assert np.allclose(result.tokens.data, (x.data[0] + x.data[1]) / 2, atol=1e-12)

    def test_identical_tokens_merge_to_common_value(self, f64: None) -> None:
        common = np.array([0.5, -1.0, 2.0])
        x = Tensor(np.tile(common, (5, 1)))

        result = poguise_merge(x, np.ones((5, 3)), 0.4)

        assert result.n_out == 2
        assert result.tokens is not None
        assert np.allclose(result.tokens.data, common, atol=1e-12)

    def test_rate_one_makes_every_token_a_source(self, rng: np.random.Generator) -> None:
        x = Tensor(rng.normal(size=(7, 4)))

        result = poguise_merge(x, rng.normal(size=(7, 3)), 1.0)

        assert result.n_out == 7
        assert result.sources.tolist() == list(range(7))

    def test_single_token_is_skipped(self) -> None:
        result = poguise_merge(Tensor(np.ones((1, 4))), np.ones((1, 2)), 0.3)

        assert result.skipped
        assert result.tokens is None

    @pytest.mark.parametrize("n", [5, 9, 33, 64])
    def test_matches_pairwise_oracle(self, n: int, f64: None, rng: np.random.Generator) -> None:
        x = rng.normal(size=(n, 5))
        features = rng.normal(size=(n, 6))
        lam = 0.3

        result = poguise_merge(Tensor(x), features, lam)

        sources, candidates = _poguise_oracle(x, features, round_count(n * lam))
        assert result.sources.tolist() == sources
        assert result.candidates.tolist() == candidates
        assert result.tokens is not None
        expected = (x[sources] + x[candidates]) / 2
        assert np.max(np.abs(result.tokens.data - expected)) < 1e-12

    def test_random_instances_match_oracle(self, f64: None) -> None:
        rng = np.random.default_rng(2024)
        for trial in range(1000):
            n = int(rng.integers(2, 65))
            lam = float(rng.uniform(0.05, 1.0))
            x = rng.normal(size=(n, 5))
            features = rng.normal(size=(n, 6))

            result = poguise_merge(Tensor(x), features, lam)

            sources, candidates = _poguise_oracle(x, features, round_count(n * lam))
            assert result.sources.tolist() == sources, (trial, n, lam)
            assert result.candidates.tolist() == candidates, (trial, n, lam)

    def test_feature_scale_invariance(self, rng: np.random.Generator) -> None:
        x = Tensor(rng.normal(size=(12, 4)))
        features = rng.normal(size=(12, 6))

        plain = poguise_merge(x, features, 0.3)
        scaled = poguise_merge(x, features * 5.0, 0.3)

        assert plain.pairs == scaled.pairs

    def test_gradient_splits_between_parents(self, f64: None, rng: np.random.Generator) -> None:
        x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        features = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])

        result = poguise_merge(x, features, 0.3)
        assert result.tokens is not None
        sum_all(result.tokens).backward()

        assert x.grad is not None
        assert np.allclose(x.grad[:2], 0.5)
        assert np.allclose(x.grad[2], 0.0)


def _bipartite_oracle(x: np.ndarray, f: np.ndarray, r: int) -> np.ndarray:
    a_set = list(range(0, len(x), 2))
    b_set = list(range(1, len(x), 2))
    matches = []
    for pos, a in enumerate(a_set):
        sims = [
            float(f[a] @ f[b]) / (np.linalg.norm(f[a]) * np.linalg.norm(f[b])) for b in b_set
        ]
        best = int(np.argmax(sims))
        matches.append((sims[best], pos, b_set[best]))
    chosen = sorted(matches, key=lambda item: (-item[0], item[1]))[:r]
    folded: dict[int, list[int]] = {b: [b] for b in b_set}
    merged_a = set()
    for _, pos, b in chosen:
        folded[b].append(a_set[pos])
        merged_a.add(a_set[pos])
    rows = [x[a] for a in a_set if a not in merged_a]
    rows += [np.mean([x[i] for i in folded[b]], axis=0) for b in b_set]
    return np.array(rows)


class TestBipartiteMerge:
    def test_more_than_half_is_rejected(self, rng: np.random.Generator) -> None:
        with pytest.raises(ConfigError, match="at most half"):
            bipartite_merge(Tensor(rng.normal(size=(4, 3))), rng.normal(size=(4, 3)), 0.8)

    def test_half_is_allowed(self) -> None:
        assert BipartiteMerger.removal_count(8, 0.5) == 4
        assert BipartiteMerger.removal_count(1, 0.9) == 0

    def test_two_identical_tokens(self, f64: None) -> None:
        x = Tensor(np.array([[1.0, 2.0], [1.0, 2.0]]))

        result = bipartite_merge(x, np.ones((2, 2)), 0.5)

        assert result.n_out == 1
        assert result.tokens is not None
        assert np.allclose(result.tokens.data, [[1.0, 2.0]], atol=1e-12)

    @pytest.mark.parametrize("lam", [0.125, 0.25, 0.5])
    def test_matches_reference_matcher(
        self, lam: float, f64: None, rng: np.random.Generator
    ) -> None:
        x = rng.normal(size=(8, 4))
        features = rng.normal(size=(8, 5))

        result = bipartite_merge(Tensor(x), features, lam)

        expected = _bipartite_oracle(x, features, round_count(8 * lam))
        assert result.tokens is not None
        assert result.tokens.shape == expected.shape
        assert np.max(np.abs(result.tokens.data - expected)) < 1e-12


class TestApplySelection:
    def test_identity_configuration(self, toy_batch: TokenBatch, rng: np.random.Generator) -> None:
        cfg = SelectionConfig(rho=1.0, merge_policy=MergePolicy.NONE)
        record = AttentionRecord(attn=_stochastic(rng, toy_batch.n_tokens), layer=2)

        batch, outcome = apply_selection(toy_batch, record, cfg)

        assert batch is toy_batch
        assert outcome.kept.tolist() == list(range(8))
        assert outcome.merge_skipped

    def test_full_keep_rate_needs_no_scores(self, rng: np.random.Generator) -> None:
        flat = _flat_batch(0, 6)
        record = AttentionRecord(attn=_stochastic(rng, flat.n_tokens), layer=1)

        batch, outcome = apply_selection(flat, record, SelectionConfig(rho=1.0))

        assert batch.counts() == (1, 0, 6)
        assert outcome.kept.tolist() == list(range(6))
        assert outcome.sources.size == 0

    def test_prune_then_merge(self, toy_batch: TokenBatch, rng: np.random.Generator) -> None:
        n_tok = toy_batch.n_tokens
        record = AttentionRecord(
            attn=_stochastic(rng, n_tok), layer=2, keys=rng.normal(size=(2, n_tok, 3))
        )

        batch, outcome = apply_selection(toy_batch, record, SelectionConfig(rho=0.6, lam=0.3))

        # 8 visual: keep round(4.8) = 5, merge round(3 * 0.3) = 1
        assert batch.counts() == (1, 4, 6)
        before, after = toy_batch.tokens.data, batch.tokens.data
        assert np.array_equal(after[:5], before[:5])
        visual = before[5:]
        assert np.array_equal(after[5:10], visual[outcome.kept])
        [(source, candidate)] = outcome.pairs
        assert np.allclose(after[10], (visual[source] + visual[candidate]) / 2, atol=1e-12)
        assert batch.merged.tolist() == [False] * 5 + [True]
        assert np.array_equal(batch.visual_origin[5], toy_batch.visual_origin[source])
        assert int(batch.alive_mask.sum()) == 6

    def test_partition_of_incoming_tokens(
        self, toy_batch: TokenBatch, rng: np.random.Generator
    ) -> None:
        n_tok = toy_batch.n_tokens
        record = AttentionRecord(
            attn=_stochastic(rng, n_tok), layer=2, keys=rng.normal(size=(2, n_tok, 3))
        )

        _, outcome = apply_selection(toy_batch, record, SelectionConfig(rho=0.5, lam=0.5))

        kept = set(outcome.kept.tolist())
        sources = set(outcome.sources.tolist())
        candidates = set(outcome.candidates.tolist())
        dropped = set(outcome.dropped.tolist())
        assert kept | sources | candidates | dropped == set(range(8))
        assert not kept & (sources | dropped)
        assert len(kept) == 4
        assert len(outcome.pairs) == 2

        statuses = outcome.statuses()
        assert statuses.count("kept") == 4
        assert statuses.count("merged-source") == 2

    def test_bipartite_stage(self, toy_batch: TokenBatch, rng: np.random.Generator) -> None:
        n_tok = toy_batch.n_tokens
        record = AttentionRecord(
            attn=_stochastic(rng, n_tok), layer=2, keys=rng.normal(size=(2, n_tok, 3))
        )
        cfg = SelectionConfig(rho=0.5, lam=0.5, merge_policy=MergePolicy.BIPARTITE)

        batch, outcome = apply_selection(toy_batch, record, cfg)

        # 4 kept, 4 discarded of which 2 fold into partners
        assert batch.n_visual == 6
        assert outcome.n_merged == 2
        assert int(batch.alive_mask.sum()) == 6

    def test_merge_over_all_visual_tokens(
        self, toy_batch: TokenBatch, rng: np.random.Generator
    ) -> None:
        n_tok = toy_batch.n_tokens
        record = AttentionRecord(
            attn=_stochastic(rng, n_tok), layer=2, keys=rng.normal(size=(2, n_tok, 3))
        )
        cfg = SelectionConfig(
            rho=1.0, lam=0.5, merge_policy=MergePolicy.BIPARTITE, merge_scope=MergeScope.ALL
        )

        batch, outcome = apply_selection(toy_batch, record, cfg)

        # every even token folds into an odd partner
        assert batch.n_visual == 4
        assert outcome.kept.size == 0
        assert outcome.sources.size == 4
        assert stage_counts(8, cfg, 1) == [8, 4]

    def test_selection_csv(
        self, toy_batch: TokenBatch, rng: np.random.Generator, tmp_path: Path
    ) -> None:
        n_tok = toy_batch.n_tokens
        record = AttentionRecord(
            attn=_stochastic(rng, n_tok), layer=2, keys=rng.normal(size=(2, n_tok, 3))
        )
        _, outcome = apply_selection(toy_batch, record, SelectionConfig())

        path = write_selection_csv([outcome], tmp_path / "out" / "selection.csv")

        with path.open(encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_HEADER
        assert len(rows) == 9
        assert {row[0] for row in rows[1:]} == {"1"}
        assert [row[4] for row in rows[1:]] == outcome.statuses()


def test_reference_stage_counts() -> None:
    assert stage_counts(1568, SelectionConfig(rho=0.6, lam=0.3), 3) == [1568, 1129, 813, 585]
    assert stage_counts(16, SelectionConfig(rho=0.6, lam=0.3), 2) == [16, 12, 8]


def test_forward_pass_reproduces_reference_counts(rng: np.random.Generator) -> None:
    spec = ClipSpec(frames=16, channels=1, height=224, width=224)
    model = VideoTransformer(
        spec,
        EncoderConfig(depth=7, dim=8, heads=2, mlp_ratio=2, selection_stages=(3, 5, 7)),
        HeadConfig(num_classes=2, landmarks=2, decoder_channels=4),
    )

    with no_grad():
        out = model.forward(rng.normal(size=spec.dims), SelectionConfig(rho=0.6, lam=0.3))

    assert out.visual_counts == [1568, 1568, 1568, 1129, 1129, 813, 813]
    assert [o.n_after for o in out.outcomes] == [1129, 813, 585]
    assert all(o.batch.n_pose == 196 for o in out.outcomes)
