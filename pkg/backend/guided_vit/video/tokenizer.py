"""Clip tokenization: cube embedding, positional table, class and pose tokens.

A clip of T×C×H×W pixels is cut into non-overlapping cubes of
cube_t×C×cube_h×cube_w, traversed in (t, h, w) row-major order. Each cube is
flattened in (dt, c, dy, dx) order and projected to D. The token sequence is
always ``[class, pose..., visual...]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from ..settings import ClipConfig
from ..tensor import Tensor, add, concat, linear, split


@dataclass(frozen=True)
class ClipSpec:
    """Clip geometry and the token counts it implies."""

    frames: int
    channels: int
    height: int
    width: int
    cube_t: int = 2
    cube_h: int = 16
    cube_w: int = 16

    def __post_init__(self) -> None:
        if min(self.frames, self.channels, self.height, self.width) < 1:
            msg = f"Clip dims must be positive: {self.dims}"
            raise ShapeError(msg)
        if self.frames % self.cube_t or self.height % self.cube_h or self.width % self.cube_w:
            msg = (
                f"Clip {self.dims} is not divisible into "
                f"{self.cube_t}x{self.cube_h}x{self.cube_w} cubes"
            )
            raise ShapeError(msg)

    @classmethod
    def from_config(cls, cfg: ClipConfig) -> ClipSpec:
        return cls(
            frames=cfg.frames,
            channels=cfg.channels,
            height=cfg.height,
            width=cfg.width,
            cube_t=cfg.cube_t,
            cube_h=cfg.cube_h,
            cube_w=cfg.cube_w,
        )

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return (self.frames, self.channels, self.height, self.width)

    @property
    def t(self) -> int:
        return self.frames // self.cube_t

    @property
    def h(self) -> int:
        return self.height // self.cube_h

    @property
    def w(self) -> int:
        return self.width // self.cube_w

    @property
    def n_vis(self) -> int:
        return self.t * self.h * self.w

    @property
    def n_pose(self) -> int:
        return self.h * self.w

    @property
    def cube_size(self) -> int:
        return self.cube_t * self.channels * self.cube_h * self.cube_w

    @property
    def heatmap_grid(self) -> tuple[int, int]:
        """Decoder output grid: two stride-2 upsamplings of h×w."""
        return (4 * self.h, 4 * self.w)

    def token_count(self, pose_tokens: bool = True) -> int:
        return 1 + (self.n_pose if pose_tokens else 0) + self.n_vis


@dataclass
class TokenBatch:
    """Token sequence of one clip plus the bookkeeping selection needs.

    Attributes:
        tokens: ``(1 + n_pose + n_visual) × D``.
        n_pose: Number of pose tokens following the class token.
        visual_origin: ``n_visual × 3`` (cube t, row, col) per visual token.
        merged: Per visual token, whether it is the result of a merge.
        alive_mask: Over the original ``t·h·w`` cube grid (row-major), which
            positions are still represented by a visual token.
    """

    tokens: Tensor
    n_pose: int
    visual_origin: np.ndarray
    merged: np.ndarray
    alive_mask: np.ndarray
    grid: tuple[int, int, int] = field(default=(0, 0, 0))

    def __post_init__(self) -> None:
        if self.tokens.ndim != 2:
            msg = f"Token tensor must be 2-d, got {self.tokens.dims}"
            raise ShapeError(msg)
        if self.visual_origin.shape != (self.n_visual, 3):
            msg = (
                f"visual_origin has shape {self.visual_origin.shape}, "
                f"expected ({self.n_visual}, 3)"
            )
            raise ShapeError(msg)
        if self.merged.shape != (self.n_visual,):
            raise ShapeError("merged flags do not match visual token count")

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0]

    @property
    def n_visual(self) -> int:
        return self.n_tokens - 1 - self.n_pose

    @property
    def n_semantic(self) -> int:
        """Class plus pose tokens."""
        return 1 + self.n_pose

    def counts(self) -> tuple[int, int, int]:
        return (1, self.n_pose, self.n_visual)

    def with_tokens(self, tokens: Tensor) -> TokenBatch:
        """Same bookkeeping, new token values (shape must match)."""
        if tokens.shape != self.tokens.shape:
            msg = f"Replacement tokens {tokens.dims} differ from {self.tokens.dims}"
            raise ShapeError(msg)
        return TokenBatch(
            tokens=tokens,
            n_pose=self.n_pose,
            visual_origin=self.visual_origin,
            merged=self.merged,
            alive_mask=self.alive_mask,
            grid=self.grid,
        )

    def origin_index(self) -> np.ndarray:
        """Flat (t, row, col) row-major index of each visual token's origin."""
        _, h, w = self.grid
        o = self.visual_origin
        return (o[:, 0] * h + o[:, 1]) * w + o[:, 2]


@dataclass
class TokenizerParams:
    """Learnable tables of the tokenizer."""

    proj_weight: Tensor
    proj_bias: Tensor
    cls_token: Tensor
    pos_embed: Tensor
    pose_tokens: Tensor | None = None

    @classmethod
    def init(
        cls,
        spec: ClipSpec,
        dim: int,
        rng: np.random.Generator,
        *,
        pose_tokens: bool = True,
        std: float = 0.02,
    ) -> TokenizerParams:
        def normal(*shape: int) -> Tensor:
            return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)

        return cls(
            proj_weight=normal(spec.cube_size, dim),
            proj_bias=Tensor(np.zeros(dim), requires_grad=True),
            cls_token=normal(1, dim),
            pos_embed=normal(spec.n_vis, dim),
            pose_tokens=normal(spec.n_pose, dim) if pose_tokens else None,
        )

    def named(self) -> dict[str, Tensor]:
        params = {
            "embed.proj.weight": self.proj_weight,
            "embed.proj.bias": self.proj_bias,
            "embed.cls_token": self.cls_token,
            "embed.pos_embed": self.pos_embed,
        }
        if self.pose_tokens is not None:
            params["embed.pose_tokens"] = self.pose_tokens
        return params


def _clip_array(clip: Tensor | np.ndarray, spec: ClipSpec) -> np.ndarray:
    data = clip.data if isinstance(clip, Tensor) else np.asarray(clip)
    if data.shape != spec.dims:
        msg = f"Clip has dims {list(data.shape)}, expected {list(spec.dims)}"
        raise ShapeError(msg)
    return data


def extract_cubes(clip: Tensor | np.ndarray, spec: ClipSpec) -> np.ndarray:
    """Gather cube contents: ``n_vis × cube_size`` in (t, h, w) order."""
    x = _clip_array(clip, spec)
    c = spec.channels
    x = x.reshape(spec.t, spec.cube_t, c, spec.h, spec.cube_h, spec.w, spec.cube_w)
    x = x.transpose(0, 3, 5, 1, 2, 4, 6)
    return np.ascontiguousarray(x.reshape(spec.n_vis, spec.cube_size))


def reconstruct_clip(cubes: np.ndarray, spec: ClipSpec) -> np.ndarray:
    """Inverse of `extract_cubes`."""
    if cubes.shape != (spec.n_vis, spec.cube_size):
        msg = f"Cube array {cubes.shape} does not match {(spec.n_vis, spec.cube_size)}"
        raise ShapeError(msg)
    c = spec.channels
    x = cubes.reshape(spec.t, spec.h, spec.w, spec.cube_t, c, spec.cube_h, spec.cube_w)
    x = x.transpose(0, 3, 4, 1, 5, 2, 6)
    return np.ascontiguousarray(x.reshape(spec.dims))


def cube_origins(spec: ClipSpec) -> np.ndarray:
    """(cube t, row, col) of every visual token in traversal order."""
    tt, hh, ww = np.meshgrid(
        np.arange(spec.t), np.arange(spec.h), np.arange(spec.w), indexing="ij"
    )
    return np.stack([tt.ravel(), hh.ravel(), ww.ravel()], axis=1).astype(np.int64)


def positional_embed(batch: TokenBatch, table: Tensor) -> TokenBatch:
    """Add row i of `table` to visual token i; class and pose tokens untouched."""
    if table.ndim != 2 or table.shape != (batch.n_visual, batch.dim):
        msg = (
            f"Positional table {table.dims} does not match "
            f"{batch.n_visual} visual tokens of width {batch.dim}"
        )
        raise ShapeError(msg)
    head, visual = split(batch.tokens, [batch.n_semantic, batch.n_visual])
    return batch.with_tokens(concat([head, add(visual, table)]))


def cube_embed(clip: Tensor | np.ndarray, spec: ClipSpec, params: TokenizerParams) -> TokenBatch:
    """Tokenize a clip into ``[class, pose..., visual...]`` with positions added.

    Raises:
        ShapeError: If the clip does not match `spec` or tables are mis-sized.
    """
    cubes = Tensor(extract_cubes(clip, spec))
    if params.proj_weight.shape[0] != spec.cube_size:
        msg = (
            f"Projection expects cubes of {params.proj_weight.shape[0]} values, "
            f"clip yields {spec.cube_size}"
        )
        raise ShapeError(msg)
    visual = linear(cubes, params.proj_weight, params.proj_bias)

    parts = [params.cls_token]
    n_pose = 0
    if params.pose_tokens is not None:
        if params.pose_tokens.shape[0] != spec.n_pose:
            msg = f"{params.pose_tokens.shape[0]} pose tokens for a {spec.h}x{spec.w} grid"
            raise ShapeError(msg)
        parts.append(params.pose_tokens)
        n_pose = spec.n_pose
    parts.append(visual)

    batch = TokenBatch(
        tokens=concat(parts),
        n_pose=n_pose,
        visual_origin=cube_origins(spec),
        merged=np.zeros(spec.n_vis, dtype=bool),
        alive_mask=np.ones(spec.n_vis, dtype=bool),
        grid=(spec.t, spec.h, spec.w),
    )
    return positional_embed(batch, params.pos_embed)
