"""Dataset directories: PTNSR clips, annotation JSONL and a JSON manifest.

Layout::

    <root>/manifest.json
    <root>/annotations.jsonl
    <root>/clips/<clip id>.ptnsr
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import ValidationError

from ..errors import FormatError
from ..heatmap import read_annotations, write_annotations
from ..schemas import ClipEntry, DatasetManifest, KeypointAnnotation
from ..settings import SyntheticSpec
from ..tensor import read_ptnsr, write_ptnsr
from .synthetic import GeneratedClip, class_names, clip_plan, generate_clip, split_ids

MANIFEST_FILE = "manifest.json"
CLIP_DIR = "clips"


@dataclass
class Dataset:
    root: Path
    manifest: DatasetManifest
    annotations: dict[str, list[KeypointAnnotation]] = field(default_factory=dict)

    def entries(self, split: str = "all") -> list[ClipEntry]:
        return self.manifest.split_entries(split)  # type: ignore[arg-type]

    def load_clip(self, entry: ClipEntry) -> np.ndarray:
        return read_ptnsr(self.root / entry.file)

    def clip_annotations(self, entry: ClipEntry) -> list[KeypointAnnotation]:
        return self.annotations.get(entry.id, [])


def generate_clips(spec: SyntheticSpec, workers: int = 1) -> list[GeneratedClip]:
    """Generate every clip of `spec`; output order does not depend on `workers`."""
    plan = clip_plan(spec)

    def make(item: tuple[str, int, int]) -> GeneratedClip:
        clip_id, label, seed = item
        return generate_clip(spec, label, seed, clip_id)

    if workers <= 1:
        return [make(item) for item in plan]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(make, plan))


def write_dataset(root: str | Path, spec: SyntheticSpec, workers: int = 1) -> DatasetManifest:
    """Generate the synthetic dataset under `root` and return its manifest."""
    target = Path(root)
    (target / CLIP_DIR).mkdir(parents=True, exist_ok=True)
    clips = generate_clips(spec, workers)
    splits = split_ids({c.clip_id: c.label for c in clips}, spec.test_fraction, spec.seed)

    entries: list[ClipEntry] = []
    annotations: list[KeypointAnnotation] = []
    for clip in clips:
        rel = f"{CLIP_DIR}/{clip.clip_id}.ptnsr"
        write_ptnsr(target / rel, clip.clip)
        entries.append(
            ClipEntry(id=clip.clip_id, file=rel, label=clip.label, split=splits[clip.clip_id])
        )
        annotations.extend(clip.annotations)

    manifest = DatasetManifest(
        classes=class_names(spec.num_classes),
        clips=entries,
        frames=spec.frames,
        size=spec.size,
        landmarks=spec.landmarks,
        seed=spec.seed,
    )
    write_annotations(target / manifest.annotations, annotations)
    (target / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.info(
        "Wrote {} clips ({} train / {} test) to {}",
        len(entries),
        len(manifest.split_entries("train")),
        len(manifest.split_entries("test")),
        target,
    )
    return manifest


def read_manifest(root: str | Path) -> DatasetManifest:
    path = Path(root) / MANIFEST_FILE
    if not path.exists():
        msg = f"No dataset manifest at {path}"
        raise FormatError(msg)
    try:
        return DatasetManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        msg = f"{path}: invalid manifest: {exc.errors()[0]['msg']}"
        raise FormatError(msg) from exc


def read_dataset(root: str | Path) -> Dataset:
    """Load the manifest and annotations (clips are read lazily)."""
    base = Path(root)
    manifest = read_manifest(base)
    grouped: dict[str, list[KeypointAnnotation]] = {}
    ann_path = base / manifest.annotations
    if ann_path.exists():
        for ann in read_annotations(ann_path):
            grouped.setdefault(ann.clip, []).append(ann)
    return Dataset(root=base, manifest=manifest, annotations=grouped)
