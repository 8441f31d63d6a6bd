"""Learnable parameters of the classification and heatmap heads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensor import Tensor


def _param(values: np.ndarray) -> Tensor:
    return Tensor(values, requires_grad=True)


@dataclass
class ClassifierParams:
    fc1_weight: Tensor
    fc1_bias: Tensor
    fc2_weight: Tensor
    fc2_bias: Tensor

    @classmethod
    def init(
        cls, dim: int, num_classes: int, rng: np.random.Generator, std: float = 0.02
    ) -> ClassifierParams:
        return cls(
            fc1_weight=_param(rng.normal(0.0, std, size=(dim, dim))),
            fc1_bias=_param(np.zeros(dim)),
            fc2_weight=_param(rng.normal(0.0, std, size=(dim, num_classes))),
            fc2_bias=_param(np.zeros(num_classes)),
        )

    def named(self, prefix: str = "head.cls") -> dict[str, Tensor]:
        return {
            f"{prefix}.fc1.weight": self.fc1_weight,
            f"{prefix}.fc1.bias": self.fc1_bias,
            f"{prefix}.fc2.weight": self.fc2_weight,
            f"{prefix}.fc2.bias": self.fc2_bias,
        }


@dataclass
class DecoderParams:
    """Two 4×4 stride-2 deconvolutions and a 1×1 projection to L channels."""

    deconv1_kernel: Tensor
    deconv1_bias: Tensor
    deconv2_kernel: Tensor
    deconv2_bias: Tensor
    proj_weight: Tensor
    proj_bias: Tensor

    @classmethod
    def init(
        cls,
        dim: int,
        hidden: int,
        landmarks: int,
        rng: np.random.Generator,
        std: float = 0.02,
    ) -> DecoderParams:
        return cls(
            deconv1_kernel=_param(rng.normal(0.0, std, size=(dim, hidden, 4, 4))),
            deconv1_bias=_param(np.zeros(hidden)),
            deconv2_kernel=_param(rng.normal(0.0, std, size=(hidden, hidden, 4, 4))),
            deconv2_bias=_param(np.zeros(hidden)),
            proj_weight=_param(rng.normal(0.0, std, size=(landmarks, hidden))),
            proj_bias=_param(np.zeros(landmarks)),
        )

    @property
    def hidden(self) -> int:
        return self.deconv1_kernel.shape[1]

    def named(self, prefix: str = "head.heatmap") -> dict[str, Tensor]:
        return {
            f"{prefix}.deconv1.kernel": self.deconv1_kernel,
            f"{prefix}.deconv1.bias": self.deconv1_bias,
            f"{prefix}.deconv2.kernel": self.deconv2_kernel,
            f"{prefix}.deconv2.bias": self.deconv2_bias,
            f"{prefix}.proj.weight": self.proj_weight,
            f"{prefix}.proj.bias": self.proj_bias,
        }
