"""RoI extraction: detector boxes filtered by rules, plus motion boxes from the
binarized motion map after removing everything the detector already covers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .adapters import detect_objects
from .geometry import BoundingBox

__all__ = [
    "BoundingBox",
    "RoiThresholds",
    "binarize",
    "detect_motion_rois",
    "extract_rois",
    "filter_appearance_rois",
    "subtract_rois",
]


@dataclass(frozen=True)
class RoiThresholds:
    T_s: float = 0.5
    T_a: float = 144.0
    T_o: float = 0.6
    T_b: float = 1.0
    T_ar: float = 10.0

    def __post_init__(self):
        if min(self.T_s, self.T_a, self.T_o, self.T_b, self.T_ar) <= 0:
            raise ValueError("RoI thresholds must be positive")
        if self.T_o > 1:
            raise ValueError("T_o must lie in (0, 1]")
        if self.T_ar <= 1:
            raise ValueError("T_ar must exceed 1")


def _overlap_ratio(a: BoundingBox, b: BoundingBox) -> float:
    return a.intersection(b) / min(a.area, b.area)


def filter_appearance_rois(boxes, T_a, T_o) -> list[BoundingBox]:
    """Drop boxes with area <= T_a, then boxes overlapping a kept box of larger
    or equal area by a ratio >= T_o (intersection over the smaller area).

    Ties in area go to the higher confidence, then to the earlier box.
    """
    order = sorted(range(len(boxes)), key=lambda k: (-boxes[k].area, -boxes[k].confidence, k))
    kept: list[BoundingBox] = []
    for k in order:
        b = boxes[k]
        if b.area <= T_a:
            continue
        if any(_overlap_ratio(b, r) >= T_o for r in kept):
            continue
        kept.append(b)
    return kept


def binarize(motion_scalar, T_b) -> np.ndarray:
    return np.asarray(motion_scalar) > T_b


def subtract_rois(binary_map, boxes) -> np.ndarray:
    out = np.array(binary_map, dtype=bool, copy=True)
    for b in boxes:
        out[b.y1 : b.y2, b.x1 : b.x2] = False
    return out


def detect_motion_rois(binary_map, T_a, T_ar) -> list[BoundingBox]:
    out = []
    for x1, y1, x2, y2 in kernels.component_boxes(binary_map):
        b = BoundingBox(int(x1), int(y1), int(x2), int(y2), 1.0, "m")
        if b.area > T_a and 1.0 / T_ar < b.aspect_ratio < T_ar:
            out.append(b)
    return out


def extract_rois(frame, motion_map, detector, thresholds: RoiThresholds, frame_idx=None) -> list[BoundingBox]:
    """Appearance RoIs followed by motion RoIs for one frame.

    ``detector=None`` runs motion-only extraction. ``motion_map`` is a
    :class:`~vcc.adapters.MotionMap` or a per-pixel scalar array.
    """
    H, W = np.shape(frame)[:2]
    if detector is None:
        appearance = []
    else:
        appearance = filter_appearance_rois(
            detect_objects(frame, detector, thresholds.T_s, frame_idx), thresholds.T_a, thresholds.T_o
        )
    scalar = motion_map.scalar() if hasattr(motion_map, "scalar") else np.asarray(motion_map)
    if scalar.shape != (H, W):
        raise ValueError(f"motion map shape {scalar.shape} does not match frame {(H, W)}")
    binary = subtract_rois(binarize(scalar, thresholds.T_b), appearance)
    return appearance + detect_motion_rois(binary, thresholds.T_a, thresholds.T_ar)
