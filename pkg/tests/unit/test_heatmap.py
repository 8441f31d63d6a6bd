"""Unit tests for heatmap rendering, combination, decoding and annotation files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal

import numpy as np
import pytest

from backend.guided_vit.errors import FormatError, ShapeError
from backend.guided_vit.heatmap import (
    HeatmapSet,
    clip_heatmaps,
    combine_multiperson,
    decode_keypoints,
    heatmap_mae,
    pixel_to_grid,
    read_annotations,
    render_gaussian,
    render_keypoints,
    time_average,
    write_annotations,
)
from backend.guided_vit.schemas import KeypointAnnotation

GRID = (56, 56)


def _single(cell: tuple[int, int], grid: tuple[int, int] = GRID) -> HeatmapSet:
    heat, valid = render_gaussian((float(cell[0]), float(cell[1])), 2.0, grid)
    return HeatmapSet(heat[None], np.array([valid]))


class TestRenderGaussian:
    def test_peak_and_falloff(self) -> None:
        heat, valid = render_gaussian((28.0, 28.0), 2.0, GRID)

        assert valid
        assert heat[28, 28] == 1.0
        assert heat[28, 30] == pytest.approx(math.exp(-0.5), abs=1e-12)
        assert heat[28, 30] == pytest.approx(0.6065, abs=1e-4)
        assert heat.max() == 1.0

    def test_mass_of_interior_keypoint(self) -> None:
        heat, _ = render_gaussian((20.0, 31.0), 2.0, GRID)
        assert heat.sum() == pytest.approx(2 * math.pi * 4.0, rel=1e-3)

    def test_translation_equivariance(self) -> None:
        base, _ = render_gaussian((20.0, 20.0), 2.0, GRID)
        moved, _ = render_gaussian((23.0, 18.0), 2.0, GRID)

        assert np.allclose(moved[10:40, 13:43], base[12:42, 10:40])

    def test_outside_grid_is_invalid(self) -> None:
        heat, valid = render_gaussian((56.4, 3.0), 2.0, GRID)

        assert not valid
        assert not heat.any()

    def test_pixel_mapping_aligns_centres(self) -> None:
        assert pixel_to_grid(1.5, 1.5, (224, 224), GRID) == (0.0, 0.0)
        assert pixel_to_grid(113.5, 1.5, (224, 224), GRID) == (28.0, 0.0)


class TestRenderKeypoints:
    def test_low_confidence_and_out_of_frame_are_invalid(self) -> None:
        ann = KeypointAnnotation(
            clip="c", frame=0, kps=[(10.0, 12.0, 0.9), (10.0, 12.0, 0.2), (40.0, 5.0, 1.0)]
        )

        heat = render_keypoints(ann, (32, 32), (8, 8))

        assert heat.valid.tolist() == [True, False, False]
        assert heat.maps[0].max() == 1.0
        assert not heat.maps[1:].any()


class TestTimeAverage:
    def test_identical_frames_are_unchanged(self) -> None:
        frame = _single((10, 20))
        out = time_average([frame, frame, frame])

        assert np.allclose(out.maps, frame.maps, atol=1e-15)
        assert out.valid.tolist() == [True]

    def test_two_positions_give_half_peaks(self) -> None:
        a, b = _single((10, 10)), _single((40, 40))

        out = time_average([a, a, b, b])

        assert out.maps[0, 10, 10] == pytest.approx(0.5, abs=1e-9)
        assert out.maps[0, 40, 40] == pytest.approx(0.5, abs=1e-9)

    def test_matches_frame_loop(self, rng: np.random.Generator) -> None:
        frames = [
            HeatmapSet(rng.random((3, 8, 8)), rng.random(3) > 0.3) for _ in range(5)
        ]

        out = time_average(frames)

        for ch in range(3):
            total, count = np.zeros((8, 8)), 0
            for f in frames:
                if f.valid[ch]:
                    total += f.maps[ch]
                    count += 1
            expected = total / count if count else np.zeros((8, 8))
            assert np.max(np.abs(out.maps[ch] - expected)) < 1e-12
            assert out.valid[ch] == (count > 0)

    def test_channel_permutation_commutes(self, rng: np.random.Generator) -> None:
        frames = [HeatmapSet(rng.random((4, 6, 6)), rng.random(4) > 0.4) for _ in range(3)]
        perm = np.array([2, 0, 3, 1])

        out = time_average(frames)
        permuted = time_average([HeatmapSet(f.maps[perm], f.valid[perm]) for f in frames])

        assert np.array_equal(permuted.maps, out.maps[perm])
        assert np.array_equal(permuted.valid, out.valid[perm])

    def test_mismatched_frames(self) -> None:
        with pytest.raises(ShapeError):
            time_average([_single((1, 1)), _single((1, 1), grid=(8, 8))])


class TestCombineMultiperson:
    def test_single_person_is_identity(self) -> None:
        person = _single((5, 7))
        out = combine_multiperson([person])

        assert np.array_equal(out.maps, person.maps)

    def test_disjoint_peaks_keep_full_height(self) -> None:
        out = combine_multiperson([_single((10, 10)), _single((45, 45))])

        assert out.maps[0, 10, 10] == 1.0
        assert out.maps[0, 45, 45] == 1.0

    def test_overlap_matches_pointwise_max(self, rng: np.random.Generator) -> None:
        persons = [HeatmapSet(rng.random((2, 6, 6)), np.array([True, False])) for _ in range(3)]

        out = combine_multiperson(persons)

        for ch in range(2):
            for r in range(6):
                for c in range(6):
                    assert out.maps[ch, r, c] == max(p.maps[ch, r, c] for p in persons)
        assert out.valid.tolist() == [True, False]

    def test_max_is_commutative_and_idempotent(self, rng: np.random.Generator) -> None:
        a = HeatmapSet(rng.random((2, 4, 4)), np.array([True, True]))
        b = HeatmapSet(rng.random((2, 4, 4)), np.array([True, True]))

        assert np.array_equal(combine_multiperson([a, b]).maps, combine_multiperson([b, a]).maps)
        assert np.array_equal(combine_multiperson([a, a]).maps, a.maps)

    def test_channel_permutation_commutes(self, rng: np.random.Generator) -> None:
        persons = [HeatmapSet(rng.random((4, 5, 5)), rng.random(4) > 0.5) for _ in range(3)]
        perm = np.array([3, 1, 0, 2])

        out = combine_multiperson(persons)
        permuted = combine_multiperson([HeatmapSet(p.maps[perm], p.valid[perm]) for p in persons])

        assert np.array_equal(permuted.maps, out.maps[perm])
        assert np.array_equal(permuted.valid, out.valid[perm])

    @pytest.mark.parametrize("mode", ["max", "sum"])
    def test_grouping_does_not_matter(
        self, mode: Literal["max", "sum"], rng: np.random.Generator
    ) -> None:
        a, b, c = (HeatmapSet(rng.random((2, 4, 4)) * 0.4, rng.random(2) > 0.5) for _ in range(3))

        left = combine_multiperson([combine_multiperson([a, b], mode), c], mode)
        right = combine_multiperson([a, combine_multiperson([b, c], mode)], mode)
        flat = combine_multiperson([a, b, c], mode)

        assert np.allclose(left.maps, right.maps, atol=1e-15)
        assert np.allclose(left.maps, flat.maps, atol=1e-15)
        assert np.array_equal(left.valid, right.valid)
        assert np.array_equal(left.valid, flat.valid)

    def test_clipped_sum(self) -> None:
        out = combine_multiperson([_single((10, 10)), _single((11, 10))], mode="sum")
        assert out.maps.max() == 1.0


class TestClipHeatmaps:
    def test_people_then_frames(self) -> None:
        annotations = [
            KeypointAnnotation(clip="c", frame=0, person=0, kps=[(2.0, 2.0, 1.0)]),
            KeypointAnnotation(clip="c", frame=0, person=1, kps=[(26.0, 26.0, 1.0)]),
            KeypointAnnotation(clip="c", frame=1, person=0, kps=[(2.0, 2.0, 1.0)]),
        ]

        out = clip_heatmaps(annotations, [0, 1], (32, 32), (8, 8), landmarks=1)

        # (2, 2) px lands in cell (0, 0); (26, 26) px in cell (6, 6)
        assert out.maps[0, 0, 0] == pytest.approx(1.0)
        assert out.maps[0, 6, 6] == pytest.approx(0.5, abs=1e-3)

    def test_frame_without_people_counts_as_invalid(self) -> None:
        annotations = [KeypointAnnotation(clip="c", frame=1, kps=[(2.0, 2.0, 1.0)])]

        out = clip_heatmaps(annotations, [0, 1], (32, 32), (8, 8), landmarks=1)

        assert out.valid.tolist() == [True]
        assert out.maps[0, 0, 0] == pytest.approx(1.0)


class TestDecode:
    def test_gaussian_decodes_to_centre(self) -> None:
        coords, valid = decode_keypoints(_single((17, 33)))

        assert coords.tolist() == [[17, 33]]
        assert valid.tolist() == [True]

    def test_uniform_map_ties_to_origin(self) -> None:
        coords, valid = decode_keypoints(np.full((1, 5, 5), 0.3))

        assert coords.tolist() == [[0, 0]]
        assert valid.tolist() == [True]

    def test_zero_channel_is_invalid(self) -> None:
        _, valid = decode_keypoints(np.zeros((2, 4, 4)))
        assert valid.tolist() == [False, False]

    def test_round_trip_within_one_cell(self, rng: np.random.Generator) -> None:
        for x, y in rng.uniform(0, 224, size=(100, 2)):
            gx, gy = pixel_to_grid(float(x), float(y), (224, 224), GRID)
            heat, valid = render_gaussian((gx, gy), 2.0, GRID)
            if not valid:
                continue
            coords, _ = decode_keypoints(heat[None])
            assert abs(coords[0, 0] - gx) <= 1.0
            assert abs(coords[0, 1] - gy) <= 1.0


class TestMae:
    def test_zero_for_identical_maps(self) -> None:
        gt = _single((10, 10))
        assert heatmap_mae(gt.maps.copy(), gt) == 0.0

    def test_constant_offset(self) -> None:
        gt = HeatmapSet(np.full((2, 4, 4), 0.5), np.array([True, True]))
        assert heatmap_mae(gt.maps + 0.01, gt) == pytest.approx(0.01, abs=1e-12)

    def test_only_valid_channels_count(self, rng: np.random.Generator) -> None:
        gt = HeatmapSet(rng.random((3, 4, 4)), np.array([True, False, True]))
        pred = rng.random((3, 4, 4))

        total, cells = 0.0, 0
        for ch in (0, 2):
            for r in range(4):
                for c in range(4):
                    total += abs(pred[ch, r, c] - gt.maps[ch, r, c])
                    cells += 1
        assert heatmap_mae(pred, gt) == pytest.approx(total / cells, abs=1e-12)

    def test_no_valid_channels(self) -> None:
        gt = HeatmapSet(np.zeros((1, 4, 4)), np.array([False]))
        assert heatmap_mae(np.ones((1, 4, 4)), gt) == 0.0

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ShapeError):
            heatmap_mae(np.zeros((1, 3, 3)), _single((1, 1), grid=(4, 4)))


class TestAnnotationFiles:
    def test_write_then_read(self, tmp_path: Path) -> None:
        anns = [
            KeypointAnnotation(clip="a", frame=3, person=1, kps=[(1.0, 2.0, 0.5)] * 5),
            KeypointAnnotation(clip="b", frame=0, kps=[(4.0, 0.0, 1.0)] * 5),
        ]

        path = write_annotations(tmp_path / "ann" / "train.jsonl", anns)

        assert read_annotations(path) == anns

    def test_bad_line_names_its_position(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.jsonl"
        path.write_text(
            '{"clip": "a", "frame": 0, "kps": [[1, 2, 0.5]]}\n{"clip": "a", "frame": -1}\n',
            encoding="utf-8",
        )

        with pytest.raises(FormatError, match=":2:"):
            read_annotations(path)

    def test_confidence_out_of_range(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.jsonl"
        path.write_text('{"clip": "a", "frame": 0, "kps": [[1, 2, 1.5]]}\n', encoding="utf-8")

        with pytest.raises(FormatError):
            read_annotations(path)
