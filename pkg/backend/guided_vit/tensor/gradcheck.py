"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
from loguru import logger

from ..errors import NumericError, VerificationError
from .core import Tensor, no_grad

DEFAULT_STEP = 1e-5
DENOMINATOR_FLOOR = 1e-8


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|, 1e-8)."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOMINATOR_FLOOR)
    return np.abs(analytic - numeric) / denom


def _evaluate(f: Callable[[], Tensor]) -> float:
    try:
        out = f()
    except NumericError as exc:
        raise VerificationError(f"Loss evaluation failed: {exc}") from exc
    if out.data.size != 1:
        msg = f"grad_check needs a scalar-valued computation, got dims {out.dims}"
        raise VerificationError(msg)
    value = float(out.data.reshape(-1)[0])
    if not np.isfinite(value):
        raise VerificationError("Loss is not finite")
    return value


def grad_check(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    *,
    step: float = DEFAULT_STEP,
    max_elements: int | None = None,
    seed: int = 0,
) -> float:
    """Compare analytic gradients of `f` against central differences.

    Args:
        f: Zero-argument callable recomputing a scalar loss from `params`.
        params: Leaf tensors (float64) to differentiate with respect to.
        step: Finite-difference half step h.
        max_elements: When set, check only this many randomly chosen
            elements per parameter (deterministic for a given `seed`).
        seed: Seed for the element subsample.

    Returns:
        The worst relative error over all checked elements.

    Raises:
        VerificationError: If a parameter is not float64 or the loss is not
            finite.
    """
    for p in params:
        if p.dtype != np.float64:
            msg = f"grad_check requires float64 parameters, got {p.dtype}"
            raise VerificationError(msg)
        p.requires_grad = True
        p.zero_grad()

    loss = f()
    _evaluate(lambda: loss)
    loss.backward()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p in params:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad
        flat = p.data.reshape(-1)
        positions = np.arange(flat.size)
        if max_elements is not None and flat.size > max_elements:
            positions = np.sort(rng.choice(flat.size, size=max_elements, replace=False))

        numeric = np.empty(positions.size)
        with no_grad():
            for n, i in enumerate(positions):
                original = flat[i]
                flat[i] = original + step
                plus = _evaluate(f)
                flat[i] = original - step
                minus = _evaluate(f)
                flat[i] = original
                numeric[n] = (plus - minus) / (2.0 * step)

        err = relative_error(analytic.reshape(-1)[positions], numeric)
        if err.size:
            worst = max(worst, float(err.max()))

    logger.debug("grad_check over {} tensors: max relative error {:.3e}", len(params), worst)
    return worst
