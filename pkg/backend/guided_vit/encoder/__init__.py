"""ViT encoder blocks exposing per-layer attention."""

from .attention import (
    AttentionParams,
    AttentionRecord,
    mhsa,
    multi_head_attention,
)
from .block import BlockParams, mlp, vit_block

__all__ = [
    "AttentionParams",
    "AttentionRecord",
    "BlockParams",
    "mhsa",
    "mlp",
    "multi_head_attention",
    "vit_block",
]
