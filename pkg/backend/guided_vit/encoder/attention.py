"""Multi-head self-attention with head-averaged attention capture."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NumericError, ShapeError
from ..settings import SimilarityFeature
from ..tensor import Tensor, add, concat, linear, matmul, scale, softmax_rows, split, transpose
from ..video import TokenBatch

ROW_SUM_TOLERANCE = 1e-4


@dataclass
class AttentionRecord:
    """Attention of one layer.

    Attributes:
        attn: ``N × N`` mean over heads of post-softmax attention.
        layer: 1-based layer index.
        queries: ``M × N × d_head``, kept only at selection stages.
        keys: ``M × N × d_head``, kept only at selection stages.
    """

    attn: np.ndarray
    layer: int
    queries: np.ndarray | None = None
    keys: np.ndarray | None = None

    @property
    def n_tokens(self) -> int:
        return self.attn.shape[0]

    def check_row_stochastic(self, tol: float = ROW_SUM_TOLERANCE) -> None:
        sums = self.attn.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=tol):
            msg = f"Layer {self.layer} attention rows sum to [{sums.min()}, {sums.max()}]"
            raise NumericError(msg)

    def feature(self, kind: SimilarityFeature) -> np.ndarray:
        """Per-token similarity feature, ``N × F`` (heads concatenated for Q/K)."""
        if kind is SimilarityFeature.ATTN:
            return self.attn
        per_head = self.queries if kind is SimilarityFeature.Q else self.keys
        if per_head is None:
            msg = f"Layer {self.layer} did not retain {kind.value} (not a selection stage)"
            raise ShapeError(msg)
        m, n, d = per_head.shape
        return per_head.transpose(1, 0, 2).reshape(n, m * d)


@dataclass
class AttentionParams:
    qkv_weight: Tensor
    qkv_bias: Tensor
    proj_weight: Tensor
    proj_bias: Tensor

    @classmethod
    def init(cls, dim: int, rng: np.random.Generator, std: float = 0.02) -> AttentionParams:
        return cls(
            qkv_weight=Tensor(rng.normal(0.0, std, size=(dim, 3 * dim)), requires_grad=True),
            qkv_bias=Tensor(np.zeros(3 * dim), requires_grad=True),
            proj_weight=Tensor(rng.normal(0.0, std, size=(dim, dim)), requires_grad=True),
            proj_bias=Tensor(np.zeros(dim), requires_grad=True),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.qkv.weight": self.qkv_weight,
            f"{prefix}.qkv.bias": self.qkv_bias,
            f"{prefix}.proj.weight": self.proj_weight,
            f"{prefix}.proj.bias": self.proj_bias,
        }


def multi_head_attention(
    x: Tensor,
    params: AttentionParams,
    heads: int,
    *,
    layer: int = 0,
    keep_qk: bool = False,
) -> tuple[Tensor, AttentionRecord]:
    """Scaled dot-product attention of every token over every token.

    Returns the projected output (no residual) and the layer's record.
    """
    n, dim = x.shape
    if params.qkv_weight.shape != (dim, 3 * dim):
        msg = f"qkv weight {params.qkv_weight.dims} does not fit token width {dim}"
        raise ShapeError(msg)
    if dim % heads:
        msg = f"Token width {dim} not divisible by {heads} heads"
        raise ShapeError(msg)
    d_head = dim // heads
    inv_sqrt = 1.0 / math.sqrt(d_head)

    q, k, v = split(linear(x, params.qkv_weight, params.qkv_bias), [dim, dim, dim], axis=1)
    q_heads = split(q, [d_head] * heads, axis=1)
    k_heads = split(k, [d_head] * heads, axis=1)
    v_heads = split(v, [d_head] * heads, axis=1)

    outputs: list[Tensor] = []
    attn_sum = np.zeros((n, n), dtype=x.dtype)
    for qh, kh, vh in zip(q_heads, k_heads, v_heads, strict=True):
        probs = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt))
        attn_sum += probs.data
        outputs.append(matmul(probs, vh))

    record = AttentionRecord(attn=attn_sum / heads, layer=layer)
    if keep_qk:
        record.queries = np.stack([h.data for h in q_heads])
        record.keys = np.stack([h.data for h in k_heads])
    merged = concat(outputs, axis=1) if heads > 1 else outputs[0]
    return linear(merged, params.proj_weight, params.proj_bias), record


def mhsa(
    batch: TokenBatch,
    params: AttentionParams,
    heads: int,
    *,
    layer: int = 0,
    keep_qk: bool = False,
) -> tuple[TokenBatch, AttentionRecord]:
    """Attention over all tokens of `batch` with the residual added."""
    out, record = multi_head_attention(batch.tokens, params, heads, layer=layer, keep_qk=keep_qk)
    return batch.with_tokens(add(batch.tokens, out)), record
