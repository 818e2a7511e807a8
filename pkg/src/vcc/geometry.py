"""Axis-aligned boxes in pixel coordinates (end-exclusive)."""
from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class BoundingBox:
    x1: int
    y1: int
    x2: int
    y2: int
    confidence: float = 1.0
    source: str = "a"

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box {self.coords}")

    @property
    def coords(self):
        return (self.x1, self.y1, self.x2, self.y2)

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def area(self):
        return self.width * self.height

    @property
    def aspect_ratio(self):
        return self.width / self.height

    @property
    def center(self):
        return ((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    def intersection(self, other: BoundingBox) -> int:
        w = min(self.x2, other.x2) - max(self.x1, other.x1)
        h = min(self.y2, other.y2) - max(self.y1, other.y1)
        return max(w, 0) * max(h, 0)

    def iou(self, other: BoundingBox) -> float:
        inter = self.intersection(other)
        return inter / (self.area + other.area - inter)

    def clip(self, height, width) -> BoundingBox | None:
        """Clip to the frame; None if nothing of the box is left."""
        x1, y1 = max(self.x1, 0), max(self.y1, 0)
        x2, y2 = min(self.x2, width), min(self.y2, height)
        if x1 >= x2 or y1 >= y2:
            return None
        return replace(self, x1=int(x1), y1=int(y1), x2=int(x2), y2=int(y2))


def box_from_float(x1, y1, x2, y2, confidence=1.0, source="a"):
    """Round a detector's float box outward to whole pixels."""
    import math

    return BoundingBox(math.floor(x1), math.floor(y1), math.ceil(x2), math.ceil(y2), float(confidence), source)
