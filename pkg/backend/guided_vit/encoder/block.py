"""Pre-norm ViT block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensor import Tensor, add, gelu, layernorm, linear
from ..video import TokenBatch
from .attention import AttentionParams, AttentionRecord, multi_head_attention


@dataclass
class BlockParams:
    norm1_gamma: Tensor
    norm1_beta: Tensor
    attn: AttentionParams
    norm2_gamma: Tensor
    norm2_beta: Tensor
    fc1_weight: Tensor
    fc1_bias: Tensor
    fc2_weight: Tensor
    fc2_bias: Tensor

    @classmethod
    def init(
        cls, dim: int, mlp_ratio: int, rng: np.random.Generator, std: float = 0.02
    ) -> BlockParams:
        hidden = dim * mlp_ratio

        def param(values: np.ndarray) -> Tensor:
            return Tensor(values, requires_grad=True)

        return cls(
            norm1_gamma=param(np.ones(dim)),
            norm1_beta=param(np.zeros(dim)),
            attn=AttentionParams.init(dim, rng, std),
            norm2_gamma=param(np.ones(dim)),
            norm2_beta=param(np.zeros(dim)),
            fc1_weight=param(rng.normal(0.0, std, size=(dim, hidden))),
            fc1_bias=param(np.zeros(hidden)),
            fc2_weight=param(rng.normal(0.0, std, size=(hidden, dim))),
            fc2_bias=param(np.zeros(dim)),
        )

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.norm1.gamma": self.norm1_gamma,
            f"{prefix}.norm1.beta": self.norm1_beta,
            **self.attn.named(f"{prefix}.attn"),
            f"{prefix}.norm2.gamma": self.norm2_gamma,
            f"{prefix}.norm2.beta": self.norm2_beta,
            f"{prefix}.mlp.fc1.weight": self.fc1_weight,
            f"{prefix}.mlp.fc1.bias": self.fc1_bias,
            f"{prefix}.mlp.fc2.weight": self.fc2_weight,
            f"{prefix}.mlp.fc2.bias": self.fc2_bias,
        }


def mlp(x: Tensor, params: BlockParams) -> Tensor:
    hidden = gelu(linear(x, params.fc1_weight, params.fc1_bias))
    return linear(hidden, params.fc2_weight, params.fc2_bias)


def vit_block(
    batch: TokenBatch,
    params: BlockParams,
    heads: int,
    *,
    layer: int = 0,
    keep_qk: bool = False,
    eps: float = 1e-6,
) -> tuple[TokenBatch, AttentionRecord]:
    """layernorm → attention → residual → layernorm → MLP → residual."""
    x = batch.tokens
    attn_out, record = multi_head_attention(
        layernorm(x, params.norm1_gamma, params.norm1_beta, eps),
        params.attn,
        heads,
        layer=layer,
        keep_qk=keep_qk,
    )
    x = add(x, attn_out)
    x = add(x, mlp(layernorm(x, params.norm2_gamma, params.norm2_beta, eps), params))
    return batch.with_tokens(x), record
