"""Annotation JSONL files: one KeypointAnnotation per line."""

from __future__ import annotations

import json
from collections.abc import Iterable
from pathlib import Path

from pydantic import ValidationError

from ..errors import FormatError
from ..schemas import KeypointAnnotation


def write_annotations(path: str | Path, annotations: Iterable[KeypointAnnotation]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", encoding="utf-8") as fh:
        for ann in annotations:
            fh.write(json.dumps(ann.model_dump(), separators=(",", ":")) + "\n")
    return target


def read_annotations(path: str | Path) -> list[KeypointAnnotation]:
    source = Path(path)
    annotations: list[KeypointAnnotation] = []
    with source.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                annotations.append(KeypointAnnotation.model_validate_json(line))
            except ValidationError as exc:
                msg = f"{source}:{lineno}: invalid annotation: {exc.errors()[0]['msg']}"
                raise FormatError(msg) from exc
    return annotations
