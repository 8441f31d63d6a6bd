"""Unit tests for the synthetic generator and dataset files."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from backend.guided_vit.data import (
    LANDMARKS,
    clips_per_class,
    derive_seed,
    generate_clip,
    generate_clips,
    read_dataset,
    read_manifest,
    resize_nearest,
    split_ids,
    splitmix64,
    write_dataset,
)
from backend.guided_vit.errors import ConfigError, FormatError
from backend.guided_vit.schemas import ClipEntry, DatasetManifest
from backend.guided_vit.settings import SyntheticSpec

HANDS = [LANDMARKS.index("left_hand"), LANDMARKS.index("right_hand")]


@pytest.fixture
def spec() -> SyntheticSpec:
    return SyntheticSpec(num_classes=4, clips_per_class=3, frames=8, size=32, noise=0.0)


class TestGenerateClip:
    def test_same_seed_same_clip(self, spec: SyntheticSpec) -> None:
        first = generate_clip(spec, 2, seed=99)
        second = generate_clip(spec, 2, seed=99)

        assert np.array_equal(first.clip, second.clip)
        assert first.annotations == second.annotations

    def test_noisy_clips_are_still_deterministic(self, spec: SyntheticSpec) -> None:
        noisy = spec.model_copy(update={"noise": 0.1})

        assert np.array_equal(generate_clip(noisy, 0, 5).clip, generate_clip(noisy, 0, 5).clip)
        assert not np.array_equal(generate_clip(noisy, 0, 5).clip, generate_clip(noisy, 0, 6).clip)

    def test_layout(self, spec: SyntheticSpec) -> None:
        clip = generate_clip(spec, 1, seed=3, clip_id="x")

        assert clip.clip.shape == (8, 1, 32, 32)
        assert clip.clip.dtype == np.float32
        assert len(clip.annotations) == 8
        assert all(len(a.kps) == 5 and a.clip == "x" for a in clip.annotations)

    def test_annotations_sit_on_blob_peaks(self, spec: SyntheticSpec) -> None:
        for label in range(4):
            clip = generate_clip(spec, label, seed=label + 10)
            for ann in clip.annotations:
                frame = clip.clip[ann.frame, 0]
                for x, y, conf in ann.kps:
                    assert conf == 1.0
                    assert 0 <= x < 32 and 0 <= y < 32
                    assert frame[int(y), int(x)] == frame.max() == 1.0

    def test_class_motion_differs(self) -> None:
        spec = SyntheticSpec(num_classes=4, frames=8, size=32, noise=0.0)

        def hand_motion(label: int) -> float:
            total = 0.0
            for seed in range(50):
                anns = generate_clip(spec, label, seed).annotations
                ys = np.array([[a.kps[h][1] for h in HANDS] for a in anns])
                total += float(np.abs(np.diff(ys, axis=0)).mean())
            return total / 50

        assert hand_motion(0) > hand_motion(3)
        assert hand_motion(3) == 0.0

    def test_two_actors(self, spec: SyntheticSpec) -> None:
        two = spec.model_copy(update={"persons": 2})

        clip = generate_clip(two, 0, seed=1)

        assert len(clip.annotations) == 16
        first = [a for a in clip.annotations if a.person == 0]
        second = [a for a in clip.annotations if a.person == 1]
        assert all(x < 16 for a in first for x, _, _ in a.kps)
        assert all(x >= 16 for a in second for x, _, _ in a.kps)

    def test_unknown_label(self, spec: SyntheticSpec) -> None:
        with pytest.raises(ConfigError):
            generate_clip(spec, 4, seed=0)

    def test_too_many_classes(self) -> None:
        with pytest.raises(ConfigError):
            generate_clip(SyntheticSpec(num_classes=8), 0, seed=0)


class TestSeedsAndSplits:
    def test_splitmix_reference_value(self) -> None:
        assert splitmix64(0) == 0xE220A8397B1DCDAF

    def test_derived_seeds_are_distinct(self) -> None:
        seeds = {derive_seed(7, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert derive_seed(7, 3) == derive_seed(7, 3)
        assert derive_seed(7, 3) != derive_seed(8, 3)

    def test_imbalanced_class_sizes(self) -> None:
        spec = SyntheticSpec(num_classes=3, clips_per_class=8, imbalance=0.5)
        assert clips_per_class(spec) == [8, 4, 2]

    def test_stratified_split(self) -> None:
        labels = {f"a{i}": 0 for i in range(10)} | {f"b{i}": 1 for i in range(4)} | {"c0": 2}

        split = split_ids(labels, 0.25, seed=1)

        assert set(split) == set(labels)
        test = [k for k, v in split.items() if v == "test"]
        assert sum(k.startswith("a") for k in test) == 3
        assert sum(k.startswith("b") for k in test) == 1
        assert split["c0"] == "train"
        assert split == split_ids(labels, 0.25, seed=1)

    def test_every_class_keeps_a_training_clip(self) -> None:
        split = split_ids({"a": 0, "b": 0}, 0.9)
        assert sorted(split.values()) == ["test", "train"]

    def test_worker_count_does_not_change_output(self, spec: SyntheticSpec) -> None:
        serial = generate_clips(spec, workers=1)
        threaded = generate_clips(spec, workers=3)

        assert [c.clip_id for c in serial] == [c.clip_id for c in threaded]
        assert all(np.array_equal(a.clip, b.clip) for a, b in zip(serial, threaded, strict=True))


class TestDatasetFiles:
    def test_write_then_read(self, tmp_path: Path, spec: SyntheticSpec) -> None:
        manifest = write_dataset(tmp_path, spec)

        dataset = read_dataset(tmp_path)

        assert dataset.manifest == manifest
        assert dataset.manifest.classes == ["hands-vertical", "translate", "hand-circle", "still"]
        assert len(dataset.entries()) == 12
        originals = {c.clip_id: c for c in generate_clips(spec)}
        for entry in dataset.entries():
            assert np.array_equal(dataset.load_clip(entry), originals[entry.id].clip)
            assert dataset.clip_annotations(entry) == originals[entry.id].annotations
            assert entry.label == originals[entry.id].label

    def test_splits_do_not_overlap(self, tmp_path: Path, spec: SyntheticSpec) -> None:
        manifest = write_dataset(tmp_path, spec.model_copy(update={"test_fraction": 0.34}))

        train = {e.id for e in manifest.split_entries("train")}
        test = {e.id for e in manifest.split_entries("test")}
        assert not train & test
        assert len(train | test) == 12
        assert len(test) == 4

    def test_duplicate_clip_is_rejected(self) -> None:
        entry = ClipEntry(id="a", file="clips/a.ptnsr", label=0, split="train")
        with pytest.raises(ValidationError):
            DatasetManifest(
                classes=["x"],
                clips=[entry, entry.model_copy(update={"split": "test"})],
                frames=8,
                size=32,
                landmarks=5,
            )

    def test_corrupt_clip_raises_format_error(self, tmp_path: Path, spec: SyntheticSpec) -> None:
        write_dataset(tmp_path, spec)
        dataset = read_dataset(tmp_path)
        entry = dataset.entries()[0]
        path = tmp_path / entry.file
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])

        with pytest.raises(FormatError):
            dataset.load_clip(entry)

    def test_missing_manifest(self, tmp_path: Path) -> None:
        with pytest.raises(FormatError):
            read_manifest(tmp_path)

    def test_invalid_manifest(self, tmp_path: Path) -> None:
        (tmp_path / "manifest.json").write_text('{"classes": []}', encoding="utf-8")
        with pytest.raises(FormatError):
            read_manifest(tmp_path)


def test_resize_nearest_replicates_pixels(rng: np.random.Generator) -> None:
    clip = rng.random((2, 1, 4, 4))

    big = resize_nearest(clip, 8, 8)

    assert big.shape == (2, 1, 8, 8)
    assert np.array_equal(big[..., ::2, ::2], clip)
    assert np.array_equal(big[..., 1::2, 1::2], clip)
    assert resize_nearest(clip, 4, 4) is clip
