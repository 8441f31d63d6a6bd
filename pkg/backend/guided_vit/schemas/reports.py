from __future__ import annotations

from pydantic import BaseModel, Field, model_validator


class LayerCost(BaseModel):
    """
    FLOPs of one encoder block at a given token count.
    """

    layer: int = Field(..., ge=1)
    tokens: int = Field(..., ge=1)
    attention_flops: int = Field(..., ge=0, description="QKV/output projections + scores.")
    mlp_flops: int = Field(..., ge=0)

    @property
    def total(self) -> int:
        return self.attention_flops + self.mlp_flops


class CostReport(BaseModel):
    """
    Analytic FLOP breakdown of one model configuration (1 MAC = 2 FLOPs).
    """

    label: str = Field(default="")
    token_counts: list[int] = Field(..., description="Tokens entering each layer.")
    layers: list[LayerCost]
    embed_flops: int = Field(..., ge=0)
    head_flops: int = Field(..., ge=0)
    decoder_flops: int = Field(..., ge=0)
    total_flops: int = Field(..., ge=0)

    @model_validator(mode="after")
    def parts_sum_to_total(self) -> CostReport:
        parts = self.encoder_flops + self.embed_flops + self.head_flops + self.decoder_flops
        if parts != self.total_flops:
            msg = f"Cost parts sum to {parts}, total says {self.total_flops}"
            raise ValueError(msg)
        return self

    @property
    def encoder_flops(self) -> int:
        return sum(layer.total for layer in self.layers)

    @property
    def total_gflops(self) -> float:
        return self.total_flops / 1e9

    def summary(self) -> dict[str, object]:
        data = self.model_dump()
        data["encoder_flops"] = self.encoder_flops
        data["total_gflops"] = round(self.total_gflops, 3)
        return data


class MetricsReport(BaseModel):
    """
    Evaluation metrics of one split.
    """

    split: str
    n_clips: int = Field(..., ge=0)
    micro_accuracy: float = Field(..., ge=0.0, le=1.0)
    macro_accuracy: float = Field(..., ge=0.0, le=1.0)
    per_class_accuracy: dict[int, float] = Field(
        default_factory=dict, description="Only classes with support > 0."
    )
    support: list[int]
    confusion: list[list[int]] = Field(..., description="Rows: true class, cols: predicted.")
    heatmap_mae: float | None = Field(default=None, ge=0.0)


class EpochLog(BaseModel):
    """
    One line of the training log.
    """

    epoch: int = Field(..., ge=1)
    loss: float
    loss_cls: float
    loss_hm: float
    train_accuracy: float = Field(..., ge=0.0, le=1.0)
    heatmap_mae: float | None = None
    lr_backbone: float
    lr_heads: float


class BenchRow(BaseModel):
    """
    One grid point of a keep-rate / merge-rate sweep.
    """

    rho: float
    lam: float
    gflops: float
    micro_accuracy: float | None = None
    macro_accuracy: float | None = None
