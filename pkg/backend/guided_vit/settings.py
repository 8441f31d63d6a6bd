"""Run Configuration and Settings Management.

This module provides centralized configuration for training, evaluation and
cost modelling using Pydantic Settings with support for environment
variables, YAML files, a JSON/YAML run file and default values.

The settings system follows a hierarchical priority:
    1. Explicit values (CLI flags merged over the ``--config`` run file)
    2. Environment variables (GVT_* prefix, ``__`` for nesting)
    3. .env file
    4. config/scales/{scale}.yaml (toy or base)
    5. config/defaults.yaml
    6. Model defaults

Example:
    Get the toy settings:

        >>> from backend.guided_vit.settings import get_settings
        >>> settings = get_settings()
        >>> settings.encoder.depth
        6

    Override with environment variables:

        $ export GVT_SCALE="base"
        $ export GVT_SELECTION__RHO="0.4"
"""

from __future__ import annotations

import json
import os
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    YamlConfigSettingsSource,
)

from .errors import ConfigError

# Configuration directory path
CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"

Scale = Literal["toy", "base"]


class ScorePolicy(str, Enum):
    """Which attention columns rank visual tokens for pruning."""

    CLASS = "CLASS"
    MIDFRAME = "MIDFRAME"
    CLASS_POSE = "CLASS_POSE"


class MergePolicy(str, Enum):
    """How discarded tokens are summarised."""

    NONE = "NONE"
    POGUISE = "POGUISE"
    BIPARTITE = "BIPARTITE"


class SimilarityFeature(str, Enum):
    """Per-token feature compared by cosine similarity when merging."""

    Q = "Q"
    K = "K"
    ATTN = "ATTN"


class MergeScope(str, Enum):
    """Tokens the merge step runs over."""

    DISCARDED = "DISCARDED"
    ALL = "ALL"


class AppConfig(BaseModel):
    """Application-level configuration.

    Attributes:
        name: Application name displayed in logs.
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL).
        color: Colourise console logs and tables.
    """

    name: str = Field(default="Guided Video Transformer", description="Application name")
    log_level: str = Field(default="INFO", description="Logging level")
    color: bool = Field(default=True, description="Colourise console output")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate and normalize log level.

        Args:
            v: Log level string.

        Returns:
            Normalized uppercase log level.

        Raises:
            ValueError: If log level is invalid.
        """
        valid_levels = {"TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL"}
        normalized = v.upper()
        if normalized not in valid_levels:
            msg = f"Invalid log level: {v}. Must be one of {sorted(valid_levels)}"
            raise ValueError(msg)
        return normalized


class ClipConfig(BaseModel):
    """Model input geometry: T frames of C channels at H×W, cut into cubes."""

    frames: int = Field(default=8, ge=2, description="T, frames per model window")
    channels: int = Field(default=1, ge=1, description="C, grayscale by default")
    height: int = Field(default=32, ge=1)
    width: int = Field(default=32, ge=1)
    cube_t: int = Field(default=2, ge=1)
    cube_h: int = Field(default=16, ge=1)
    cube_w: int = Field(default=16, ge=1)


class EncoderConfig(BaseModel):
    """ViT encoder geometry.

    Attributes:
        depth: Number of blocks.
        dim: Token width D.
        heads: Attention heads M; must divide `dim`.
        mlp_ratio: MLP hidden width as a multiple of D.
        selection_stages: 1-based layer indices after which token selection runs.
    """

    depth: int = Field(default=6, ge=1)
    dim: int = Field(default=64, ge=1)
    heads: int = Field(default=4, ge=1)
    mlp_ratio: int = Field(default=4, ge=1)
    selection_stages: tuple[int, ...] = Field(default=(2, 4))
    ln_eps: float = Field(default=1e-6, gt=0)
    init_std: float = Field(default=0.02, gt=0)

    @model_validator(mode="after")
    def check_geometry(self) -> EncoderConfig:
        if self.dim % self.heads:
            msg = f"dim={self.dim} is not divisible by heads={self.heads}"
            raise ValueError(msg)
        if any(s < 1 or s > self.depth for s in self.selection_stages):
            msg = f"selection_stages {self.selection_stages} outside 1..{self.depth}"
            raise ValueError(msg)
        if len(set(self.selection_stages)) != len(self.selection_stages):
            raise ValueError("selection_stages must be distinct")
        return self

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads


class SelectionConfig(BaseModel):
    """Token selection parameters.

    Attributes:
        kappa: Class-vs-pose balance in the pruning score.
        rho: Fraction of alive visual tokens kept by top-k pruning.
        lam: Merge rate among discarded tokens (YAML/JSON key ``lambda``).
            For BIPARTITE it is the fraction of the merge input removed.
        stages: Override of the encoder's selection stages.
    """

    model_config = ConfigDict(populate_by_name=True)

    kappa: float = Field(default=0.5, ge=0.0, le=1.0)
    rho: float = Field(default=0.6, gt=0.0, le=1.0)
    lam: float = Field(default=0.3, gt=0.0, le=1.0, alias="lambda")
    score_policy: ScorePolicy = ScorePolicy.CLASS_POSE
    merge_policy: MergePolicy = MergePolicy.POGUISE
    similarity_feature: SimilarityFeature = SimilarityFeature.K
    merge_scope: MergeScope = MergeScope.DISCARDED
    stages: tuple[int, ...] | None = None

    @model_validator(mode="after")
    def check_scope(self) -> SelectionConfig:
        if self.merge_scope is MergeScope.ALL and self.rho != 1.0:
            raise ValueError("merge_scope=ALL merges every visual token and requires rho=1")
        if self.merge_scope is MergeScope.ALL and self.merge_policy is MergePolicy.NONE:
            raise ValueError("merge_scope=ALL needs a merge policy")
        return self

    @property
    def is_identity(self) -> bool:
        """True when selection can never change the token batch."""
        return (
            self.rho == 1.0
            and self.merge_policy is MergePolicy.NONE
            and self.merge_scope is MergeScope.DISCARDED
        )

    def stages_for(self, encoder: EncoderConfig) -> tuple[int, ...]:
        return tuple(sorted(self.stages if self.stages is not None else encoder.selection_stages))


class HeadConfig(BaseModel):
    """Classification and heatmap heads plus task weighting."""

    num_classes: int = Field(default=4, ge=1)
    landmarks: int = Field(default=5, ge=1, description="L, heatmap channels")
    mse_scale: float = Field(default=1000.0, gt=0, description="s in ln(1 + s*MSE)")
    label_smoothing: float = Field(default=0.1, ge=0.0, lt=1.0)
    w_cls: float = Field(default=1.0, gt=0)
    w_hm: float = Field(default=1.0, gt=0)
    decoder_channels: int | None = Field(
        default=None, ge=1, description="Dd; None means min(256, 4*D)"
    )

    def decoder_width(self, dim: int) -> int:
        return self.decoder_channels or min(256, 4 * dim)


class HeatmapConfig(BaseModel):
    """Ground-truth heatmap synthesis."""

    sigma: float = Field(default=2.0, gt=0, description="Gaussian sigma in heatmap cells")
    confidence_threshold: float = Field(default=0.3, ge=0.0, le=1.0)
    combine: Literal["max", "sum"] = Field(default="max", description="Multi-person combination")


class OptimizerConfig(BaseModel):
    """AdamW with cosine annealing and global-norm clipping."""

    lr_backbone: float = Field(default=1e-3, ge=0)
    lr_heads: float = Field(default=1e-3, ge=0)
    min_lr_ratio: float = Field(default=0.01, ge=0, le=1)
    weight_decay: float = Field(default=0.05, ge=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    grad_clip: float = Field(default=1.5, gt=0)
    batch_size: int = Field(default=8, ge=1)
    epochs: int = Field(default=30, ge=1)
    accumulate_grad_batches: int = Field(default=1, ge=1)


class InferenceConfig(BaseModel):
    temporal_views: int = Field(default=3, ge=1)
    workers: int = Field(default=1, ge=1, description="Threads for per-clip evaluation")


class SyntheticSpec(BaseModel):
    """Synthetic stick-actor dataset.

    Attributes:
        num_classes: Motion patterns to draw from.
        clips_per_class: Clips for class 0; later classes shrink by `imbalance`.
        frames: Stored frames per clip (may exceed the model window).
        size: Square frame side in pixels.
        landmarks: Keypoints per actor (the stick actor has exactly five).
        persons: Actors per clip (1 or 2).
        noise: Standard deviation of additive pixel noise.
        imbalance: Class c gets round(clips_per_class * imbalance**c) clips.
        test_fraction: Per-class share of clips in the test split.
    """

    num_classes: int = Field(default=4, ge=1)
    clips_per_class: int = Field(default=50, ge=1)
    frames: int = Field(default=8, ge=4, le=64)
    size: int = Field(default=32, ge=16, le=256)
    landmarks: Literal[5] = 5
    persons: int = Field(default=1, ge=1, le=2)
    noise: float = Field(default=0.05, ge=0.0)
    seed: int = Field(default=0, ge=0)
    imbalance: float = Field(default=1.0, gt=0.0, le=1.0)
    test_fraction: float = Field(default=0.2, ge=0.0, lt=1.0)


class PathsConfig(BaseModel):
    data_dir: Path = Field(default=Path("data/synthetic"))
    runs_dir: Path = Field(default=Path("runs"))


class RunConfig(BaseSettings):
    """Central run settings.

    Aggregates every section with the priority documented at module level.

    Attributes:
        scale: Preset family, selects config/scales/{scale}.yaml.
        seed: Master seed for initialisation and data order.
        pose_tokens: Add pose tokens and the heatmap task (HM(P)).
    """

    scale: Scale = Field(default="toy", description="Preset scale (toy/base)")
    seed: int = Field(default=0, ge=0)
    pose_tokens: bool = Field(default=True)

    app: AppConfig = Field(default_factory=AppConfig)
    clip: ClipConfig = Field(default_factory=ClipConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    heads: HeadConfig = Field(default_factory=HeadConfig)
    heatmap: HeatmapConfig = Field(default_factory=HeatmapConfig)
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    inference: InferenceConfig = Field(default_factory=InferenceConfig)
    data: SyntheticSpec = Field(default_factory=SyntheticSpec)
    paths: PathsConfig = Field(default_factory=PathsConfig)

    model_config = SettingsConfigDict(
        env_prefix="GVT_",
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="ignore",
        case_sensitive=False,
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        """Insert the YAML presets below environment variables.

        The scale is resolved before any YAML is read: explicit argument,
        then ``GVT_SCALE``, then "toy".
        """
        init_kwargs = getattr(init_settings, "init_kwargs", {}) or {}
        scale = init_kwargs.get("scale") or os.getenv("GVT_SCALE", "toy")

        defaults_yaml = CONFIG_DIR / "defaults.yaml"
        scale_yaml = CONFIG_DIR / "scales" / f"{scale}.yaml"

        sources: list[PydanticBaseSettingsSource] = [init_settings, env_settings, dotenv_settings]
        if scale_yaml.exists():
            sources.append(YamlConfigSettingsSource(settings_cls, yaml_file=scale_yaml))
        if defaults_yaml.exists():
            sources.append(YamlConfigSettingsSource(settings_cls, yaml_file=defaults_yaml))
        sources.append(file_secret_settings)
        return tuple(sources)

    @model_validator(mode="after")
    def check_consistency(self) -> RunConfig:
        stages = self.selection.stages_for(self.encoder)
        if any(s < 1 or s > self.encoder.depth for s in stages):
            msg = f"selection stages {stages} outside 1..{self.encoder.depth}"
            raise ValueError(msg)
        if self.heads.num_classes < self.data.num_classes:
            msg = (
                f"heads.num_classes={self.heads.num_classes} smaller than "
                f"data.num_classes={self.data.num_classes}"
            )
            raise ValueError(msg)
        sel = self.selection
        if not self.pose_tokens and sel.score_policy is ScorePolicy.CLASS_POSE and sel.rho < 1.0:
            raise ValueError("CLASS_POSE scoring needs pose_tokens=true")
        return self

    def dump(self) -> dict[str, Any]:
        """JSON-ready snapshot (aliases used, so ``lambda`` round-trips)."""
        return json.loads(self.model_dump_json(by_alias=True))


def deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge `override` into a copy of `base`."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def read_run_file(path: str | Path) -> dict[str, Any]:
    """Load a JSON or YAML run file into a plain dict."""
    source = Path(path)
    if not source.exists():
        msg = f"Run config file not found: {source}"
        raise ConfigError(msg)
    text = source.read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text) if source.suffix in {".yaml", ".yml"} else json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        msg = f"Cannot parse run config {source}: {exc}"
        raise ConfigError(msg) from exc
    if not isinstance(data, dict):
        msg = f"Run config {source} must contain a mapping"
        raise ConfigError(msg)
    return data


def load_run_config(
    config_file: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """Build a RunConfig from an optional run file plus flag overrides.

    Raises:
        ConfigError: If the file is unreadable or validation fails.
    """
    values = read_run_file(config_file) if config_file else {}
    values = deep_merge(values, overrides or {})
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


@lru_cache(maxsize=1)
def get_settings() -> RunConfig:
    """Get cached global settings instance.

    Note:
        To force reload settings (e.g., in tests), clear the cache:

        >>> get_settings.cache_clear()
    """
    return RunConfig()
