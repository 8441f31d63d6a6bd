"""Pytest configuration and shared fixtures.

This module provides common fixtures for all tests: a float64 precision
context, a seeded generator, toy and tiny run configs, and a small synthetic
dataset written to a temporary directory.
"""

from __future__ import annotations

import os
from collections.abc import Generator
from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from backend.guided_vit.data import Dataset, read_dataset, write_dataset
from backend.guided_vit.settings import RunConfig, get_settings, load_run_config
from backend.guided_vit.tensor import precision


@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch: pytest.MonkeyPatch) -> Generator[None, None, None]:
    """Keep GVT_* variables from the developer's shell out of every test."""
    for key in list(os.environ):
        if key.startswith("GVT_"):
            monkeypatch.delenv(key, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def _detach_log_sinks() -> Generator[None, None, None]:
    """CLI runs attach a loguru sink to the test's captured stderr; drop it afterwards."""
    yield
    logger.remove()


@pytest.fixture
def f64() -> Generator[None, None, None]:
    """Run the test body in 64-bit verification mode."""
    with precision(np.float64):
        yield


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def toy_config() -> RunConfig:
    """The shipped toy preset."""
    return load_run_config(None, {"scale": "toy"})


@pytest.fixture
def tiny_config() -> RunConfig:
    """A toy variant small enough to train in seconds.

    Clip 8×32×32 in 2×16×16 cubes gives 16 visual tokens and 4 pose tokens.
    """
    return load_run_config(
        None,
        {
            "scale": "toy",
            "encoder": {"depth": 2, "dim": 16, "heads": 2, "selection_stages": [1]},
            "heads": {"num_classes": 2, "decoder_channels": 8},
            "optimizer": {"epochs": 2, "batch_size": 2},
            "inference": {"temporal_views": 3},
            "data": {
                "num_classes": 2,
                "clips_per_class": 4,
                "frames": 12,
                "size": 32,
                "test_fraction": 0.25,
            },
        },
    )


@pytest.fixture
def tiny_dataset(tmp_path: Path, tiny_config: RunConfig) -> Dataset:
    root = tmp_path / "data"
    write_dataset(root, tiny_config.data)
    return read_dataset(root)
