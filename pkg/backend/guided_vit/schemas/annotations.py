from __future__ import annotations

from pydantic import BaseModel, Field, field_validator


class KeypointAnnotation(BaseModel):
    """
    Landmarks of one person in one frame, in input-pixel coordinates.

    Serialised as one JSONL line: {"clip", "frame", "person", "kps": [[x, y, conf], ...]}.
    """

    clip: str = Field(..., min_length=1, description="Clip identifier.")
    frame: int = Field(..., ge=0, description="Frame index within the clip.")
    person: int = Field(default=0, ge=0, description="Person index within the frame.")
    kps: list[tuple[float, float, float]] = Field(
        ..., min_length=1, description="L landmarks as (x, y, confidence)."
    )

    @field_validator("kps")
    @classmethod
    def confidence_in_range(
        cls, v: list[tuple[float, float, float]]
    ) -> list[tuple[float, float, float]]:
        for _, _, conf in v:
            if not 0.0 <= conf <= 1.0:
                msg = f"Landmark confidence {conf} outside [0, 1]"
                raise ValueError(msg)
        return v

    @property
    def landmarks(self) -> int:
        return len(self.kps)
