"""Gradient-check suite run by the ``gradcheck`` command.

Every differentiable op is checked on random float64 inputs, reduced to a
scalar through a fixed random projection, followed by the composed encoder
block, both merge strategies, the task losses and a whole toy model.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from loguru import logger

from ..encoder import BlockParams, vit_block
from ..errors import VerificationError
from ..heads import (
    ClassifierParams,
    DecoderParams,
    classify,
    decode_heatmaps,
    loss_cls,
    loss_hm,
    total_loss,
)
from ..heatmap import HeatmapSet
from ..model import VideoTransformer
from ..selection import MergeResult, bipartite_merge, poguise_merge
from ..settings import EncoderConfig, HeadConfig
from ..tensor import (
    Tensor,
    add,
    concat,
    conv1x1,
    conv_transpose2d,
    gather_rows,
    gelu,
    grad_check,
    layernorm,
    linear,
    matmul,
    mean,
    precision,
    reshape,
    scale,
    softmax_rows,
    split,
    sum_all,
    transpose,
)
from ..video import ClipSpec, TokenBatch

DEFAULT_THRESHOLD = 1e-5


@dataclass
class CheckResult:
    name: str
    max_rel_error: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold


Check = tuple[str, Callable[[], Tensor], list[Tensor]]


def _leaf(rng: np.random.Generator, *shape: int, std: float = 1.0) -> Tensor:
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)


def _project(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar x·w with a fixed weight vector, so every element gets a distinct gradient."""
    flat = reshape(x, (1, x.data.size))
    return sum_all(matmul(flat, Tensor(weights.reshape(-1, 1))))


def _projected(rng: np.random.Generator, fn: Callable[[], Tensor]) -> Callable[[], Tensor]:
    weights = rng.normal(size=fn().data.size)
    return lambda: _project(fn(), weights)


def _tokens(result: MergeResult) -> Tensor:
    if result.tokens is None:
        raise VerificationError("merge produced no tokens")
    return result.tokens


def _op_checks(rng: np.random.Generator) -> list[Check]:
    checks: list[Check] = []

    def add_check(name: str, fn: Callable[[], Tensor], params: list[Tensor]) -> None:
        checks.append((name, _projected(rng, fn), params))

    a, b = _leaf(rng, 5, 7), _leaf(rng, 7, 3)
    add_check("matmul", lambda: matmul(a, b), [a, b])

    x, y, bias = _leaf(rng, 4, 6), _leaf(rng, 4, 6), _leaf(rng, 6)
    add_check("add", lambda: add(x, y), [x, y])
    add_check("add_bias", lambda: add(x, bias), [x, bias])
    add_check("scale", lambda: scale(x, -1.7), [x])
    add_check("gelu", lambda: gelu(x), [x])
    add_check("transpose", lambda: transpose(x), [x])
    add_check("reshape", lambda: reshape(x, (3, 8)), [x])

    w, wb = _leaf(rng, 6, 5), _leaf(rng, 5)
    add_check("linear", lambda: linear(x, w, wb), [x, w, wb])

    s = _leaf(rng, 4, 4)
    add_check("softmax_rows", lambda: softmax_rows(s), [s])

    gamma = Tensor(1.0 + rng.normal(0.0, 0.1, size=6), requires_grad=True)
    beta = _leaf(rng, 6)
    add_check("layernorm", lambda: layernorm(x, gamma, beta, 1e-6), [x, gamma, beta])

    cube = _leaf(rng, 3, 4, 5)
    add_check("sum_axis", lambda: sum_all(cube, axis=1), [cube])
    add_check("mean", lambda: mean(cube, axis=0), [cube])

    top, bottom = _leaf(rng, 2, 6), _leaf(rng, 3, 6)
    add_check("concat", lambda: concat([top, x, bottom]), [top, x, bottom])
    add_check("split", lambda: split(x, [1, 3])[1], [x])
    add_check("gather_rows", lambda: gather_rows(x, [3, 0, 3, 1]), [x])

    fmap, kernel, kbias = _leaf(rng, 3, 4, 4), _leaf(rng, 3, 2, 4, 4), _leaf(rng, 2)
    add_check(
        "conv_transpose2d",
        lambda: conv_transpose2d(fmap, kernel, stride=2, pad=1, bias=kbias),
        [fmap, kernel, kbias],
    )
    proj, pbias = _leaf(rng, 5, 3), _leaf(rng, 5)
    add_check("conv1x1", lambda: conv1x1(fmap, proj, pbias), [fmap, proj, pbias])
    return checks


def _module_checks(rng: np.random.Generator) -> list[Check]:
    checks: list[Check] = []
    dim, heads = 8, 2

    tokens = _leaf(rng, 6, dim)
    origin = np.stack([np.zeros(5), np.arange(5), np.zeros(5)], axis=1).astype(np.int64)
    block = BlockParams.init(dim, 2, rng, std=0.3)

    def run_block() -> Tensor:
        batch = TokenBatch(
            tokens=tokens,
            n_pose=0,
            visual_origin=origin,
            merged=np.zeros(5, dtype=bool),
            alive_mask=np.ones(5, dtype=bool),
            grid=(1, 5, 1),
        )
        return vit_block(batch, block, heads, layer=1)[0].tokens

    block_params = [tokens, *block.named("block").values()]
    checks.append(("vit_block", _projected(rng, run_block), block_params))

    disc = _leaf(rng, 9, dim)
    features = rng.normal(size=(9, dim))
    checks.append(
        (
            "poguise_merge",
            _projected(rng, lambda: _tokens(poguise_merge(disc, features, 0.5))),
            [disc],
        )
    )
    checks.append(
        (
            "bipartite_merge",
            _projected(rng, lambda: _tokens(bipartite_merge(disc, features, 0.3))),
            [disc],
        )
    )

    cls_params = ClassifierParams.init(dim, 4, rng, std=0.3)
    cls_token = _leaf(rng, 1, dim)
    checks.append(
        (
            "classifier_loss",
            lambda: loss_cls(classify(cls_token, cls_params), 2, 0.1),
            [cls_token, *cls_params.named().values()],
        )
    )

    decoder = DecoderParams.init(dim, 4, 3, rng, std=0.3)
    pose = _leaf(rng, 4, dim)
    target = HeatmapSet(
        maps=rng.uniform(size=(3, 8, 8)), valid=np.array([True, False, True])
    )

    def heatmap_loss() -> Tensor:
        hm = loss_hm(decode_heatmaps(pose, decoder, (2, 2)), target, 10.0)
        return total_loss(loss_cls(classify(cls_token, cls_params), 1, 0.1), hm, 1.0, 0.5)

    checks.append(
        (
            "heatmap_loss",
            heatmap_loss,
            [pose, cls_token, *decoder.named().values()],
        )
    )
    return checks


def _model_check(seed: int) -> Check:
    spec = ClipSpec(frames=4, channels=1, height=16, width=16, cube_t=2, cube_h=8, cube_w=8)
    encoder = EncoderConfig(
        depth=2, dim=8, heads=2, mlp_ratio=2, selection_stages=(1,), init_std=0.3
    )
    heads = HeadConfig(num_classes=3, landmarks=2, mse_scale=10.0, decoder_channels=4)
    model = VideoTransformer(spec, encoder, heads, pose_tokens=True, seed=seed)
    rng = np.random.default_rng(seed + 1)
    clip = rng.uniform(size=spec.dims)
    grid = spec.heatmap_grid
    target = HeatmapSet(maps=rng.uniform(size=(2, *grid)), valid=np.array([True, True]))

    def loss() -> Tensor:
        out = model(clip)
        hm = None if out.heatmaps is None else loss_hm(out.heatmaps, target, heads.mse_scale)
        return total_loss(loss_cls(out.logits, 1, heads.label_smoothing), hm)

    return ("toy_model", loss, model.parameters())


def run_gradient_checks(
    *,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
    max_elements: int = 12,
) -> list[CheckResult]:
    """Run the whole suite in float64 and return one result per check.

    Large tensors of the composed toy model are sampled down to
    `max_elements` entries each.
    """
    results: list[CheckResult] = []
    with precision(np.float64):
        rng = np.random.default_rng(seed)
        suite = [*_op_checks(rng), *_module_checks(rng), _model_check(seed)]
        for name, fn, params in suite:
            limit = max_elements if name == "toy_model" else None
            err = grad_check(fn, params, max_elements=limit, seed=seed)
            result = CheckResult(name=name, max_rel_error=err, threshold=threshold)
            logger.info(
                "gradcheck {:<18} {:.3e} {}", name, err, "ok" if result.passed else "FAIL"
            )
            results.append(result)
    return results

