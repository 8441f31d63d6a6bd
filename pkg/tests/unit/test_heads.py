"""Unit tests for the classification head, the heatmap decoder and the task losses."""

from __future__ import annotations

import math

import numpy as np
import pytest

from backend.guided_vit.errors import ShapeError
from backend.guided_vit.heads import (
    ClassifierParams,
    DecoderParams,
    classify,
    decode_heatmaps,
    loss_cls,
    loss_hm,
    smoothed_targets,
    total_loss,
)
from backend.guided_vit.heatmap import HeatmapSet
from backend.guided_vit.tensor import Tensor, grad_check, matmul, no_grad, reshape, sum_all


class TestClassify:
    def test_zero_output_weights_give_uniform_logits(self, rng: np.random.Generator) -> None:
        params = ClassifierParams.init(8, 5, rng, std=0.5)
        params.fc2_weight.data[...] = 0.0

        logits = classify(Tensor(rng.normal(size=(1, 8))), params)

        assert logits.dims == [5]
        assert np.all(logits.data == logits.data[0])

    def test_width_mismatch(self, rng: np.random.Generator) -> None:
        params = ClassifierParams.init(8, 3, rng)
        with pytest.raises(ShapeError):
            classify(Tensor(np.ones((1, 6))), params)

    def test_gradients(self, f64: None, rng: np.random.Generator) -> None:
        params = ClassifierParams.init(6, 4, rng, std=0.5)
        token = Tensor(rng.normal(size=(1, 6)), requires_grad=True)
        w = rng.normal(size=(4, 1))

        def loss() -> Tensor:
            logits = classify(token, params)
            return sum_all(matmul(reshape(logits, (1, 4)), Tensor(w)))

        assert grad_check(loss, [token, *params.named().values()]) < 1e-5


class TestDecodeHeatmaps:
    def test_reference_grid(self, rng: np.random.Generator) -> None:
        params = DecoderParams.init(8, 4, 13, rng)

        with no_grad():
            maps = decode_heatmaps(Tensor(rng.normal(size=(196, 8))), params)

        assert maps.dims == [13, 56, 56]

    def test_toy_grid(self, rng: np.random.Generator) -> None:
        params = DecoderParams.init(16, 8, 5, rng)

        maps = decode_heatmaps(Tensor(rng.normal(size=(4, 16))), params)

        assert maps.dims == [5, 8, 8]

    def test_rectangular_grid(self, rng: np.random.Generator) -> None:
        params = DecoderParams.init(4, 2, 1, rng)

        maps = decode_heatmaps(Tensor(rng.normal(size=(6, 4))), params, grid=(2, 3))

        assert maps.dims == [1, 8, 12]

    def test_tokens_must_fill_a_grid(self, rng: np.random.Generator) -> None:
        params = DecoderParams.init(4, 2, 1, rng)
        with pytest.raises(ShapeError):
            decode_heatmaps(Tensor(np.ones((5, 4))), params)

    def test_gradients(self, f64: None, rng: np.random.Generator) -> None:
        params = DecoderParams.init(4, 3, 2, rng, std=0.4)
        tokens = Tensor(rng.normal(size=(4, 4)), requires_grad=True)
        w = rng.normal(size=(2 * 8 * 8, 1))

        def loss() -> Tensor:
            maps = decode_heatmaps(tokens, params)
            return sum_all(matmul(reshape(maps, (1, 128)), Tensor(w)))

        err = grad_check(loss, [tokens, *params.named().values()], max_elements=10)
        assert err < 1e-5


class TestClassificationLoss:
    @pytest.mark.parametrize("eps", [0.0, 0.1, 0.5])
    def test_uniform_logits_give_log_classes(self, eps: float, f64: None) -> None:
        loss = loss_cls(Tensor(np.zeros(7)), target=3, eps=eps)
        assert float(loss.data) == pytest.approx(math.log(7), abs=1e-12)

    def test_confident_correct_prediction(self, f64: None) -> None:
        loss = loss_cls(Tensor(np.array([0.0, 60.0, 0.0])), target=1, eps=0.0)
        assert float(loss.data) < 1e-20

    def test_matches_formula(self, f64: None, rng: np.random.Generator) -> None:
        z = rng.normal(size=6)
        eps = 0.1

        loss = loss_cls(Tensor(z), target=2, eps=eps)

        p = np.exp(z) / np.exp(z).sum()
        q = np.full(6, eps / 6)
        q[2] += 1 - eps
        assert float(loss.data) == pytest.approx(-(q * np.log(p)).sum(), abs=1e-12)

    def test_smoothed_targets_sum_to_one(self) -> None:
        q = smoothed_targets(4, 0, 0.1)
        assert q.sum() == pytest.approx(1.0)
        assert q[0] == pytest.approx(0.925)

    def test_target_out_of_range(self) -> None:
        with pytest.raises(ShapeError):
            loss_cls(Tensor(np.zeros(3)), target=3)

    def test_gradients(self, f64: None, rng: np.random.Generator) -> None:
        logits = Tensor(rng.normal(size=5), requires_grad=True)
        assert grad_check(lambda: loss_cls(logits, 4, 0.1), [logits]) < 1e-5


class TestHeatmapLoss:
    @pytest.fixture
    def gt(self, rng: np.random.Generator) -> HeatmapSet:
        return HeatmapSet(rng.random((3, 4, 4)), np.array([True, True, False]))

    def test_perfect_prediction(self, gt: HeatmapSet, f64: None) -> None:
        assert float(loss_hm(Tensor(gt.maps.copy()), gt).data) == 0.0

    def test_log_scaled_mse(self, gt: HeatmapSet, f64: None) -> None:
        pred = gt.maps + math.sqrt(1e-3)

        loss = loss_hm(Tensor(pred), gt, mse_scale=1000.0)

        assert float(loss.data) == pytest.approx(math.log(2.0), abs=1e-9)

    def test_invalid_channels_are_ignored(
        self, gt: HeatmapSet, f64: None, rng: np.random.Generator
    ) -> None:
        pred = gt.maps.copy()
        pred[2] = rng.random((4, 4))

        assert float(loss_hm(Tensor(pred), gt).data) == 0.0

    def test_no_valid_channels(self, f64: None) -> None:
        gt = HeatmapSet(np.zeros((2, 4, 4)), np.zeros(2, dtype=bool))
        pred = Tensor(np.ones((2, 4, 4)), requires_grad=True)

        loss = loss_hm(pred, gt)
        loss.backward()

        assert float(loss.data) == 0.0
        assert pred.grad is not None
        assert not pred.grad.any()

    def test_shape_mismatch(self, gt: HeatmapSet) -> None:
        with pytest.raises(ShapeError):
            loss_hm(Tensor(np.zeros((3, 2, 2))), gt)

    def test_gradients(self, gt: HeatmapSet, f64: None, rng: np.random.Generator) -> None:
        pred = Tensor(gt.maps + rng.normal(0, 0.05, size=gt.maps.shape), requires_grad=True)
        assert grad_check(lambda: loss_hm(pred, gt, 1000.0), [pred]) < 1e-5


def test_total_loss_weights_both_tasks(f64: None) -> None:
    cls_loss = Tensor(np.array(2.0))
    hm_loss = Tensor(np.array(3.0))

    assert float(total_loss(cls_loss, hm_loss, w_cls=1.0, w_hm=0.5).data) == pytest.approx(3.5)
    assert float(total_loss(cls_loss, None, w_cls=2.0).data) == pytest.approx(4.0)
