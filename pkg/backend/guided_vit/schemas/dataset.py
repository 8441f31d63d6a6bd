from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

Split = Literal["train", "test"]


class ClipEntry(BaseModel):
    """
    One clip of the dataset manifest.
    """

    id: str = Field(..., min_length=1)
    file: str = Field(..., description="PTNSR file, relative to the dataset root.")
    label: int = Field(..., ge=0)
    split: Split


class DatasetManifest(BaseModel):
    """
    Labels and train/test split of a dataset directory.

    Each clip id appears exactly once, so the two splits cannot overlap.
    """

    classes: list[str] = Field(..., min_length=1)
    clips: list[ClipEntry] = Field(default_factory=list)
    annotations: str = Field(default="annotations.jsonl")
    frames: int = Field(..., ge=1)
    size: int = Field(..., ge=1)
    landmarks: int = Field(..., ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_clips(self) -> DatasetManifest:
        ids = [c.id for c in self.clips]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            msg = f"Clip ids listed more than once: {duplicates[:5]}"
            raise ValueError(msg)
        files = [c.file for c in self.clips]
        if len(set(files)) != len(files):
            raise ValueError("Two clips share one tensor file")
        for clip in self.clips:
            if clip.label >= len(self.classes):
                msg = f"Clip {clip.id} has label {clip.label} but only {len(self.classes)} classes"
                raise ValueError(msg)
        return self

    def split_entries(self, split: Literal["train", "test", "all"]) -> list[ClipEntry]:
        if split == "all":
            return list(self.clips)
        return [c for c in self.clips if c.split == split]
