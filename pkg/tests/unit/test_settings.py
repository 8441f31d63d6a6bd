"""Unit tests for settings module."""

from __future__ import annotations

from pathlib import Path

import pytest

from backend.guided_vit.errors import ConfigError
from backend.guided_vit.settings import (
    MergePolicy,
    MergeScope,
    RunConfig,
    ScorePolicy,
    SelectionConfig,
    deep_merge,
    get_settings,
    load_run_config,
)


def test_toy_preset_is_default() -> None:
    settings = RunConfig()

    assert settings.scale == "toy"
    assert settings.encoder.depth == 6
    assert settings.encoder.dim == 64
    assert settings.encoder.selection_stages == (2, 4)
    assert settings.selection.score_policy is ScorePolicy.CLASS_POSE
    assert settings.optimizer.grad_clip == 1.5


def test_base_preset_matches_reference_geometry() -> None:
    settings = RunConfig(scale="base")

    assert (settings.clip.frames, settings.clip.height, settings.clip.width) == (16, 224, 224)
    assert settings.encoder.depth == 12
    assert settings.encoder.dim == 768
    assert settings.encoder.selection_stages == (3, 5, 7)


def test_get_settings_returns_singleton() -> None:
    """Test that get_settings returns the same instance."""
    settings1 = get_settings()
    settings2 = get_settings()

    assert settings1 is settings2


def test_settings_with_environment_variables(monkeypatch: pytest.MonkeyPatch) -> None:
    """Environment variables override YAML presets.

    Args:
        monkeypatch: Pytest monkeypatch fixture.
    """
    monkeypatch.setenv("GVT_SCALE", "base")
    monkeypatch.setenv("GVT_APP__LOG_LEVEL", "debug")
    monkeypatch.setenv("GVT_SELECTION__RHO", "0.4")
    get_settings.cache_clear()

    settings = get_settings()

    assert settings.scale == "base"
    assert settings.encoder.dim == 768
    assert settings.app.log_level == "DEBUG"
    assert settings.selection.rho == pytest.approx(0.4)


def test_explicit_values_beat_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("GVT_SEED", "7")

    settings = load_run_config(None, {"seed": 3})

    assert settings.seed == 3


def test_lambda_alias_round_trips() -> None:
    selection = SelectionConfig(**{"lambda": 0.1})

    assert selection.lam == pytest.approx(0.1)
    assert RunConfig(selection={"lambda": 0.2}).dump()["selection"]["lambda"] == pytest.approx(0.2)


def test_run_file_is_merged_under_flags(tmp_path: Path) -> None:
    run_file = tmp_path / "run.json"
    run_file.write_text('{"seed": 5, "selection": {"rho": 0.5, "kappa": 0.2}}', encoding="utf-8")

    settings = load_run_config(run_file, {"selection": {"rho": 0.7}})

    assert settings.seed == 5
    assert settings.selection.rho == pytest.approx(0.7)
    assert settings.selection.kappa == pytest.approx(0.2)


def test_invalid_values_raise_config_error() -> None:
    with pytest.raises(ConfigError):
        load_run_config(None, {"selection": {"rho": 1.5}})
    with pytest.raises(ConfigError):
        load_run_config(None, {"encoder": {"dim": 30, "heads": 4}})
    with pytest.raises(ConfigError):
        load_run_config(None, {"app": {"log_level": "LOUD"}})


def test_missing_or_malformed_run_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(bad)


def test_class_pose_scoring_needs_pose_tokens() -> None:
    with pytest.raises(ConfigError):
        load_run_config(None, {"pose_tokens": False})

    baseline = load_run_config(
        None, {"pose_tokens": False, "selection": {"rho": 1.0, "merge_policy": "NONE"}}
    )
    assert baseline.selection.is_identity


def test_merge_scope_all_requires_full_keep_rate() -> None:
    with pytest.raises(ValueError, match="rho=1"):
        SelectionConfig(merge_scope=MergeScope.ALL, rho=0.6)

    scope_all = SelectionConfig(
        merge_scope=MergeScope.ALL, rho=1.0, merge_policy=MergePolicy.BIPARTITE
    )
    assert not scope_all.is_identity


def test_deep_merge_keeps_siblings() -> None:
    merged = deep_merge({"a": {"x": 1, "y": 2}, "b": 1}, {"a": {"y": 3}})

    assert merged == {"a": {"x": 1, "y": 3}, "b": 1}


def test_full_keep_rate_allows_any_score_policy_without_pose_tokens() -> None:
    cfg = load_run_config(None, {"pose_tokens": False, "selection": {"rho": 1.0}})

    assert cfg.selection.score_policy is ScorePolicy.CLASS_POSE
    assert not cfg.selection.is_identity
