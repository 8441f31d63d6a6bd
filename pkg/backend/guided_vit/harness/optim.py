"""AdamW with decoupled weight decay, cosine schedule and global-norm clipping."""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from ..tensor import Tensor


def cosine_lr(step: int, total_steps: int, lr_max: float, lr_min: float) -> float:
    """lr_min + ½(lr_max − lr_min)(1 + cos(π·step/total_steps)), flat after the end."""
    if total_steps <= 0:
        return lr_max
    progress = min(step, total_steps) / total_steps
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * progress))


def global_grad_norm(params: Iterable[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad, dtype=np.float64)))
    return math.sqrt(total)


def clip_grad_norm(params: Iterable[Tensor], max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most `max_norm`.

    Returns:
        The norm before clipping.
    """
    params = list(params)
    norm = global_grad_norm(params)
    if norm > max_norm:
        coef = max_norm / (norm + 1e-6)
        for p in params:
            if p.grad is not None:
                p.grad *= coef
    return norm


@dataclass
class ParamGroup:
    name: str
    params: list[Tensor]
    lr: float
    weight_decay: float


@dataclass
class _Moments:
    m: np.ndarray
    v: np.ndarray


@dataclass
class AdamW:
    """Adam moments with weight decay applied directly to the weights.

    Only matrices and higher-rank tensors are decayed; biases, norm scales
    and 1-d tables are not.
    """

    groups: list[ParamGroup]
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    _state: dict[int, _Moments] = field(default_factory=dict, repr=False)

    def set_lr(self, name: str, lr: float) -> None:
        for group in self.groups:
            if group.name == name:
                group.lr = lr

    def zero_grad(self) -> None:
        for group in self.groups:
            for p in group.params:
                p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - self.beta1**t
        bias2 = 1.0 - self.beta2**t
        for group in self.groups:
            lr = float(group.lr)
            for p in group.params:
                if p.grad is None:
                    continue
                state = self._state.get(id(p))
                if state is None:
                    state = _Moments(np.zeros_like(p.data), np.zeros_like(p.data))
                    self._state[id(p)] = state
                g = p.grad
                state.m *= self.beta1
                state.m += (1.0 - self.beta1) * g
                state.v *= self.beta2
                state.v += (1.0 - self.beta2) * g * g
                if lr == 0.0:
                    continue
                if group.weight_decay and p.ndim >= 2:
                    p.data -= lr * group.weight_decay * p.data
                update = (state.m / bias1) / (np.sqrt(state.v / bias2) + self.eps)
                p.data -= lr * update
