"""Classification MLP and deconvolution heatmap decoder."""

from __future__ import annotations

import math

from ..errors import ShapeError
from ..tensor import Tensor, conv1x1, conv_transpose2d, gelu, linear, reshape, transpose
from .params import ClassifierParams, DecoderParams


def classify(class_token: Tensor, params: ClassifierParams) -> Tensor:
    """Logits from the final class token: D → D (GELU) → classes."""
    dim = params.fc1_weight.shape[0]
    if class_token.data.size != dim:
        msg = f"Class token {class_token.dims} does not match head width {dim}"
        raise ShapeError(msg)
    x = reshape(class_token, (1, dim))
    hidden = gelu(linear(x, params.fc1_weight, params.fc1_bias))
    logits = linear(hidden, params.fc2_weight, params.fc2_bias)
    return reshape(logits, (logits.shape[1],))


def decode_heatmaps(
    pose_tokens: Tensor,
    params: DecoderParams,
    grid: tuple[int, int] | None = None,
) -> Tensor:
    """Pose tokens (``N_p × D``, row-major over h×w) to ``L × 4h × 4w`` maps.

    Raises:
        ShapeError: If the tokens do not fill an h×w grid.
    """
    n_pose, dim = pose_tokens.shape
    if grid is None:
        side = math.isqrt(n_pose)
        grid = (side, side)
    h, w = grid
    if h * w != n_pose or n_pose == 0:
        msg = f"{n_pose} pose tokens do not form a {h}x{w} grid"
        raise ShapeError(msg)

    spatial = reshape(transpose(pose_tokens), (dim, h, w))
    x = gelu(conv_transpose2d(spatial, params.deconv1_kernel, 2, 1, params.deconv1_bias))
    x = gelu(conv_transpose2d(x, params.deconv2_kernel, 2, 1, params.deconv2_bias))
    return conv1x1(x, params.proj_weight, params.proj_bias)
