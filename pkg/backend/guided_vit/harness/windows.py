"""Temporal windows and per-clip model inputs."""

from __future__ import annotations

import threading
from typing import TypeVar

import numpy as np

from ..data import Dataset, resize_nearest
from ..errors import ShapeError
from ..heatmap import HeatmapSet, clip_heatmaps
from ..schemas import ClipEntry
from ..settings import RunConfig
from ..video import ClipSpec

MAX_CACHED_CLIPS = 128
TARGETS_PER_CLIP = 4

_K = TypeVar("_K")
_V = TypeVar("_V")


def center_start(n_frames: int, window: int) -> int:
    if n_frames < window:
        msg = f"Clip has {n_frames} frames, model window needs {window}"
        raise ShapeError(msg)
    return (n_frames - window) // 2


def view_starts(n_frames: int, window: int, views: int) -> list[int]:
    """Start frames of `views` uniformly spaced windows (deduplicated)."""
    center = center_start(n_frames, window)
    if views <= 1 or n_frames == window:
        return [center]
    starts = np.floor(np.linspace(0, n_frames - window, views) + 0.5).astype(int)
    return sorted({int(s) for s in starts})


class ClipSource:
    """Serves model-ready windows and heatmap targets for dataset clips.

    Loaded clips and rendered targets are cached up to `max_clips` clips
    (oldest evicted first); the caches are safe to share across threads.
    """

    def __init__(
        self, dataset: Dataset, cfg: RunConfig, max_clips: int = MAX_CACHED_CLIPS
    ) -> None:
        self.dataset = dataset
        self.cfg = cfg
        self.spec = ClipSpec.from_config(cfg.clip)
        self.max_clips = max_clips
        self._lock = threading.Lock()
        self._clips: dict[str, np.ndarray] = {}
        self._targets: dict[tuple[str, int], HeatmapSet] = {}

    def _store(self, cache: dict[_K, _V], key: _K, value: _V, limit: int) -> _V:
        with self._lock:
            cached = cache.setdefault(key, value)
            while len(cache) > limit:
                del cache[next(iter(cache))]
        return cached

    def frames(self, entry: ClipEntry) -> np.ndarray:
        """Whole stored clip, resized to the model's H×W and channel count."""
        cached = self._clips.get(entry.id)
        if cached is not None:
            return cached
        clip = self.dataset.load_clip(entry)
        if clip.ndim != 4 or clip.shape[1] != self.spec.channels:
            msg = (
                f"Clip {entry.id} has dims {list(clip.shape)}, "
                f"need T x {self.spec.channels} x H x W"
            )
            raise ShapeError(msg)
        resized = resize_nearest(clip, self.spec.height, self.spec.width)
        return self._store(self._clips, entry.id, resized, self.max_clips)

    def window(self, entry: ClipEntry, start: int) -> np.ndarray:
        return self.frames(entry)[start : start + self.spec.frames]

    def starts(self, entry: ClipEntry, views: int = 1) -> list[int]:
        return view_starts(self.frames(entry).shape[0], self.spec.frames, views)

    def target(self, entry: ClipEntry, start: int) -> HeatmapSet:
        key = (entry.id, start)
        cached = self._targets.get(key)
        if cached is not None:
            return cached
        size = self.dataset.manifest.size
        rendered = clip_heatmaps(
            self.dataset.clip_annotations(entry),
            range(start, start + self.spec.frames),
            (size, size),
            self.spec.heatmap_grid,
            self.cfg.heads.landmarks,
            self.cfg.heatmap,
        )
        return self._store(self._targets, key, rendered, TARGETS_PER_CLIP * self.max_clips)

    def cached_clips(self) -> int:
        return len(self._clips)
