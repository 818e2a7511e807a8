"""Spatio-temporal cubes (STCs), their flow stacks, and block assignment.

An event at frame ``t`` with box ``b`` is the crop of ``b`` on frames
``t-D+1 .. t`` (same location on every frame), each crop resized to
``h x w``. Events are assigned to a block of a uniform grid by the box
centre, which always lands in a block of maximal overlap area.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import BoundingBox

log = logging.getLogger(__name__)


class EventSkipped(ValueError):
    """Not enough history before the frame to build a cube."""


@dataclass
class STC:
    patches: np.ndarray  # (D, h, w, 3) float32
    source_box: BoundingBox
    frame_idx: int
    block_idx: int = 0

    @property
    def D(self):
        return len(self.patches)


@dataclass
class FlowStack:
    flows: np.ndarray  # (D, h, w, 2) float32


@dataclass(frozen=True)
class BlockGrid:
    height: int
    width: int
    rows: int = 1
    cols: int = 1

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and one column")

    @property
    def n_blocks(self):
        return self.rows * self.cols

    def block_rect(self, k):
        """Exact (rational) ``(x1, y1, x2, y2)`` of block ``k`` (row-major)."""
        r, c = divmod(k, self.cols)
        bh, bw = Fraction(self.height, self.rows), Fraction(self.width, self.cols)
        return (c * bw, r * bh, (c + 1) * bw, (r + 1) * bh)

    def pixel_rect(self, k):
        x1, y1, x2, y2 = self.block_rect(k)
        return tuple(int(v) for v in (x1, y1, x2, y2))


def _cell(center2, extent, n):
    """Index along one axis for a centre given as twice its coordinate.

    A centre exactly on a boundary goes to the lower index.
    """
    q = Fraction(center2 * n, 2 * extent)
    if q.denominator == 1 and q > 0:
        idx = int(q) - 1
    else:
        idx = int(q)  # floor for q >= 0
    return min(max(idx, 0), n - 1)


def assign_block(box: BoundingBox, grid: BlockGrid) -> int:
    row = _cell(box.y1 + box.y2, grid.height, grid.rows)
    col = _cell(box.x1 + box.x2, grid.width, grid.cols)
    return row * grid.cols + col


def _crop_resize(img, box, h, w):
    crop = img[box.y1 : box.y2, box.x1 : box.x2]
    return kernels.resize_bilinear(crop, h, w).astype(np.float32)


def build_stc(frames, box: BoundingBox, frame_idx, D=5, h=32, w=32, block_idx=0) -> STC:
    if frame_idx < D - 1:
        raise EventSkipped(f"frame {frame_idx} has fewer than {D - 1} previous frames")
    patches = np.stack([_crop_resize(frames[f], box, h, w) for f in range(frame_idx - D + 1, frame_idx + 1)])
    return STC(patches, box, frame_idx, block_idx)


def build_flow_stack(flows, box: BoundingBox, frame_idx, D=5, h=32, w=32) -> FlowStack:
    if frame_idx < D - 1:
        raise EventSkipped(f"frame {frame_idx} has fewer than {D - 1} previous frames")
    return FlowStack(np.stack([_crop_resize(flows[f], box, h, w) for f in range(frame_idx - D + 1, frame_idx + 1)]))


# ---------------------------------------------------------------------------
# per-clip event sets


@dataclass
class EventSet:
    """All events of one clip, array-backed.

    ``patches``: (N, D, h, w, 3) float32 in [0, 255];
    ``flows``: (N, D, h, w, 2) float32 or None;
    ``boxes``: (N, 4) int64; ``frame_idx``/``block_idx``: (N,) int64;
    ``sources``: (N,) 'a' or 'm'.
    """

    clip_id: str
    n_frames: int
    frame_shape: tuple[int, int]
    patches: np.ndarray
    flows: np.ndarray | None
    boxes: np.ndarray
    frame_idx: np.ndarray
    block_idx: np.ndarray
    sources: np.ndarray
    skipped: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frame_idx)

    def subset(self, mask):
        return EventSet(
            self.clip_id, self.n_frames, self.frame_shape, self.patches[mask],
            None if self.flows is None else self.flows[mask], self.boxes[mask],
            self.frame_idx[mask], self.block_idx[mask], self.sources[mask], self.skipped, dict(self.meta),
        )

    def stc(self, k) -> STC:
        return STC(self.patches[k], BoundingBox(*map(int, self.boxes[k])), int(self.frame_idx[k]), int(self.block_idx[k]))

    @classmethod
    def empty(cls, clip_id, n_frames, frame_shape, D, h, w, with_flow=True):
        return cls(
            clip_id, n_frames, tuple(frame_shape),
            np.zeros((0, D, h, w, 3), np.float32),
            np.zeros((0, D, h, w, 2), np.float32) if with_flow else None,
            np.zeros((0, 4), np.int64), np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, "<U1"),
        )

    @classmethod
    def concatenate(cls, sets):
        sets = list(sets)
        first = sets[0]
        with_flow = all(s.flows is not None for s in sets)
        return cls(
            "+".join(s.clip_id for s in sets), sum(s.n_frames for s in sets), first.frame_shape,
            np.concatenate([s.patches for s in sets]),
            np.concatenate([s.flows for s in sets]) if with_flow else None,
            np.concatenate([s.boxes for s in sets]), np.concatenate([s.frame_idx for s in sets]),
            np.concatenate([s.block_idx for s in sets]), np.concatenate([s.sources for s in sets]),
            sum(s.skipped for s in sets),
        )


def build_events(frames, boxes_per_frame, flows, grid: BlockGrid, D=5, h=32, w=32, clip_id="clip") -> EventSet:
    """Cube every RoI of every frame. Frames before ``D-1`` are skipped and counted."""
    T, H, W = frames.shape[:3]
    patches, fstacks, boxes, fidx, bidx, srcs = [], [], [], [], [], []
    skipped = 0
    for t, frame_boxes in enumerate(boxes_per_frame):
        for box in frame_boxes:
            try:
                stc = build_stc(frames, box, t, D, h, w)
            except EventSkipped:
                skipped += 1
                continue
            patches.append(stc.patches)
            if flows is not None:
                fstacks.append(build_flow_stack(flows, box, t, D, h, w).flows)
            boxes.append(box.coords)
            fidx.append(t)
            bidx.append(assign_block(box, grid))
            srcs.append(box.source)
    if skipped:
        log.debug("%s: skipped %d events without %d frames of history", clip_id, skipped, D - 1)
    if not patches:
        ev = EventSet.empty(clip_id, T, (H, W), D, h, w, flows is not None)
        ev.skipped = skipped
        return ev
    return EventSet(
        clip_id, T, (H, W), np.stack(patches), np.stack(fstacks) if flows is not None else None,
        np.asarray(boxes, np.int64), np.asarray(fidx, np.int64), np.asarray(bidx, np.int64),
        np.asarray(srcs), skipped,
    )


def whole_frame_boxes(n_frames, height, width):
    """One full-frame event per frame (the frame-prediction special case)."""
    return [[BoundingBox(0, 0, width, height, 1.0, "m")] for _ in range(n_frames)]


# ---------------------------------------------------------------------------
# archives
#
# One .npz per (clip, block): arrays patches/flows/boxes/frame_idx/block_idx/
# sources plus a JSON header string {"clip_id", "n_frames", "frame_shape",
# "skipped", "block", "config_hash", "dtype", "shape"}.


def save_events(path, events: EventSet, config_hash="", block=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "clip_id": events.clip_id, "n_frames": events.n_frames, "frame_shape": list(events.frame_shape),
        "skipped": events.skipped, "block": block, "config_hash": config_hash,
        "dtype": "float32", "shape": list(events.patches.shape),
    }
    arrays = dict(
        header=np.array(json.dumps(header, sort_keys=True)), patches=events.patches, boxes=events.boxes,
        frame_idx=events.frame_idx, block_idx=events.block_idx, sources=events.sources.astype("<U1"),
    )
    if events.flows is not None:
        arrays["flows"] = events.flows
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, **arrays)
    tmp.replace(path)


def load_events(path) -> tuple[EventSet, dict]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        ev = EventSet(
            header["clip_id"], header["n_frames"], tuple(header["frame_shape"]), z["patches"],
            z["flows"] if "flows" in z.files else None, z["boxes"], z["frame_idx"], z["block_idx"],
            z["sources"], header["skipped"],
        )
    return ev, header
