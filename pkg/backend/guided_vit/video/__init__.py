"""Video tokenization."""

from .tokenizer import (
    ClipSpec,
    TokenBatch,
    TokenizerParams,
    cube_embed,
    cube_origins,
    extract_cubes,
    positional_embed,
    reconstruct_clip,
)

__all__ = [
    "ClipSpec",
    "TokenBatch",
    "TokenizerParams",
    "cube_embed",
    "cube_origins",
    "extract_cubes",
    "positional_embed",
    "reconstruct_clip",
]
