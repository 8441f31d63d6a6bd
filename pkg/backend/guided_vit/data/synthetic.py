"""Synthetic "stick actor" clips with exact keypoint labels.

An actor is five Gaussian blobs (head, left hand, right hand, left foot,
right foot) composited with a pointwise max. Each class moves the blobs in a
different pattern; the annotation of every frame is the blob centres with
confidence 1.

Per-clip seeds are derived from the master seed with splitmix64, so any clip
can be regenerated on its own and generation can run in parallel.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..schemas import KeypointAnnotation
from ..settings import SyntheticSpec

_MASK64 = (1 << 64) - 1

LANDMARKS = ("head", "left_hand", "right_hand", "left_foot", "right_foot")
HEAD, LEFT_HAND, RIGHT_HAND, LEFT_FOOT, RIGHT_FOOT = range(5)

# Rest pose as fractions of the actor box (x, y)
_REST = np.array(
    [
        [0.50, 0.22],
        [0.25, 0.50],
        [0.75, 0.50],
        [0.38, 0.82],
        [0.62, 0.82],
    ]
)


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Independent 64-bit seed for clip `index` under `master`."""
    return splitmix64((master & _MASK64) ^ splitmix64(index))


@dataclass(frozen=True)
class _Motion:
    amplitude: float
    phase: float
    cycles: float
    direction: float


Pattern = Callable[[np.ndarray, np.ndarray, _Motion], np.ndarray]


def _hands_vertical(rest: np.ndarray, s: np.ndarray, m: _Motion) -> np.ndarray:
    pts = np.repeat(rest[None], s.size, axis=0)
    wave = m.amplitude * np.sin(2 * math.pi * m.cycles * s + m.phase)
    pts[:, LEFT_HAND, 1] += wave
    pts[:, RIGHT_HAND, 1] -= wave
    return pts


def _translate(rest: np.ndarray, s: np.ndarray, m: _Motion) -> np.ndarray:
    pts = np.repeat(rest[None], s.size, axis=0)
    pts[:, :, 0] += (m.direction * m.amplitude * 2.0 * (s - 0.5))[:, None]
    return pts


def _hand_circle(rest: np.ndarray, s: np.ndarray, m: _Motion) -> np.ndarray:
    pts = np.repeat(rest[None], s.size, axis=0)
    angle = 2 * math.pi * m.cycles * s + m.phase
    pts[:, RIGHT_HAND, 0] += m.amplitude * np.cos(angle)
    pts[:, RIGHT_HAND, 1] += m.amplitude * np.sin(angle)
    return pts


def _still(rest: np.ndarray, s: np.ndarray, m: _Motion) -> np.ndarray:
    return np.repeat(rest[None], s.size, axis=0)


def _jump(rest: np.ndarray, s: np.ndarray, m: _Motion) -> np.ndarray:
    pts = np.repeat(rest[None], s.size, axis=0)
    pts[:, :, 1] -= (m.amplitude * np.abs(np.sin(math.pi * m.cycles * s + m.phase)))[:, None]
    return pts


def _feet_step(rest: np.ndarray, s: np.ndarray, m: _Motion) -> np.ndarray:
    pts = np.repeat(rest[None], s.size, axis=0)
    wave = m.amplitude * np.sin(2 * math.pi * m.cycles * s + m.phase)
    pts[:, LEFT_FOOT, 1] -= np.maximum(wave, 0.0)
    pts[:, RIGHT_FOOT, 1] -= np.maximum(-wave, 0.0)
    return pts


def _head_nod(rest: np.ndarray, s: np.ndarray, m: _Motion) -> np.ndarray:
    pts = np.repeat(rest[None], s.size, axis=0)
    pts[:, HEAD, 1] += 0.5 * m.amplitude * np.sin(2 * math.pi * m.cycles * s + m.phase)
    return pts


PATTERNS: tuple[tuple[str, Pattern], ...] = (
    ("hands-vertical", _hands_vertical),
    ("translate", _translate),
    ("hand-circle", _hand_circle),
    ("still", _still),
    ("jump", _jump),
    ("feet-step", _feet_step),
    ("head-nod", _head_nod),
)


def class_names(num_classes: int) -> list[str]:
    if num_classes > len(PATTERNS):
        msg = f"Only {len(PATTERNS)} motion patterns exist, asked for {num_classes} classes"
        raise ConfigError(msg)
    return [name for name, _ in PATTERNS[:num_classes]]


def blob_sigma(size: int) -> float:
    return max(1.0, size / 32.0)


def _render_frame(centres: np.ndarray, size: int, sigma: float) -> np.ndarray:
    """Max-composite of unit Gaussians at integer pixel `centres` (K × 2, x/y)."""
    grid = np.arange(size, dtype=np.float64)
    frame = np.zeros((size, size))
    for x, y in centres:
        blob = np.exp(-((grid[:, None] - y) ** 2 + (grid[None, :] - x) ** 2) / (2 * sigma * sigma))
        np.maximum(frame, blob, out=frame)
    return frame


@dataclass
class GeneratedClip:
    clip_id: str
    clip: np.ndarray
    annotations: list[KeypointAnnotation]
    label: int


def _actor_boxes(persons: int, size: int) -> list[tuple[float, float, float]]:
    """(x0, y0, side) of each actor's box inside the frame."""
    if persons == 1:
        return [(0.0, 0.0, float(size))]
    half = size / 2.0
    return [(0.0, half / 2.0, half), (half, half / 2.0, half)]


def generate_clip(
    spec: SyntheticSpec, label: int, seed: int, clip_id: str = "clip"
) -> GeneratedClip:
    """Render one clip of class `label`.

    Returns:
        Frames ``T × 1 × S × S`` (float32), one annotation per (frame,
        person) and the label.
    """
    if not 0 <= label < spec.num_classes:
        msg = f"Label {label} outside 0..{spec.num_classes - 1}"
        raise ConfigError(msg)
    class_names(spec.num_classes)
    _, pattern = PATTERNS[label]
    rng = np.random.default_rng(seed)
    size, frames = spec.size, spec.frames
    s = np.arange(frames) / max(frames - 1, 1)

    centres = np.zeros((frames, 0, 2))
    for x0, y0, side in _actor_boxes(spec.persons, size):
        motion = _Motion(
            amplitude=rng.uniform(0.10, 0.15),
            phase=rng.uniform(0.0, 2 * math.pi),
            cycles=rng.uniform(0.8, 1.2),
            direction=rng.choice([-1.0, 1.0]),
        )
        jitter = rng.uniform(-0.04, 0.04, size=2)
        pts = pattern(_REST + jitter, s, motion)
        pixels = np.stack([x0 + pts[..., 0] * side, y0 + pts[..., 1] * side], axis=-1)
        centres = np.concatenate([centres, pixels], axis=1)

    centres = np.clip(np.floor(centres + 0.5), 0, size - 1)
    sigma = blob_sigma(size)
    clip = np.stack([_render_frame(centres[f], size, sigma) for f in range(frames)])
    if spec.noise > 0:
        clip = clip + rng.normal(0.0, spec.noise, size=clip.shape)
    clip = clip.astype(np.float32)[:, None]

    n_kp = len(LANDMARKS)
    annotations = [
        KeypointAnnotation(
            clip=clip_id,
            frame=f,
            person=p,
            kps=[(float(x), float(y), 1.0) for x, y in centres[f, p * n_kp : (p + 1) * n_kp]],
        )
        for f in range(frames)
        for p in range(spec.persons)
    ]
    return GeneratedClip(clip_id=clip_id, clip=clip, annotations=annotations, label=label)


def clips_per_class(spec: SyntheticSpec) -> list[int]:
    """round(clips_per_class · imbalance^c), at least one clip per class."""
    return [
        max(1, math.floor(spec.clips_per_class * spec.imbalance**c + 0.5))
        for c in range(spec.num_classes)
    ]


def clip_plan(spec: SyntheticSpec) -> list[tuple[str, int, int]]:
    """(clip id, label, seed) for every clip, in generation order."""
    plan: list[tuple[str, int, int]] = []
    index = 0
    for label, count in enumerate(clips_per_class(spec)):
        for k in range(count):
            plan.append((f"c{label}_{k:04d}", label, derive_seed(spec.seed, index)))
            index += 1
    return plan


def split_ids(
    labels: dict[str, int], test_fraction: float, seed: int = 0
) -> dict[str, str]:
    """Stratified split: each class sends round(n · fraction) clips to test.

    Classes with more than one clip always keep at least one training clip.
    """
    by_class: dict[int, list[str]] = {}
    for clip_id in sorted(labels):
        by_class.setdefault(labels[clip_id], []).append(clip_id)
    rng = np.random.default_rng(splitmix64(seed))
    assignment: dict[str, str] = {}
    for label in sorted(by_class):
        ids = by_class[label]
        order = rng.permutation(len(ids))
        n_test = math.floor(len(ids) * test_fraction + 0.5)
        if len(ids) > 1:
            n_test = min(n_test, len(ids) - 1)
        for rank, i in enumerate(order):
            assignment[ids[i]] = "test" if rank < n_test else "train"
    return assignment


def resize_nearest(clip: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbour resize of the two trailing (pixel) axes."""
    src_h, src_w = clip.shape[-2:]
    if (src_h, src_w) == (height, width):
        return clip
    rows = np.minimum((np.arange(height) * src_h) // height, src_h - 1)
    cols = np.minimum((np.arange(width) * src_w) // width, src_w - 1)
    return np.ascontiguousarray(clip[..., rows[:, None], cols[None, :]])
