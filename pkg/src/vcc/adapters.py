"""Object-detector and optical-flow adapters, plus the temporal-gradient fallback.

Heavy pretrained models stay outside the package. They can be plugged in
as callables or run out of process and handed over as files::

    <root>/<clip>/<frame_idx>.det    float array (N, 6): x1 y1 x2 y2 confidence class_id
    <root>/<clip>/<frame_idx>.flow   float array (H, W, 2): dx dy

Each handoff file is a single array in NPY format (magic, version, header
dict with ``descr``/``shape``, then raw data), written without the ``.npy``
suffix.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import cv2
import numpy as np

from . import kernels
from .geometry import BoundingBox, box_from_float


class AdapterUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    confidence: float
    class_id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass
class MotionMap:
    values: np.ndarray
    mode: str

    def scalar(self):
        """Per-pixel quantity compared against the binarization threshold."""
        if self.mode == "flow":
            return flow_magnitude(self.values)
        return self.values


class Detector(Protocol):
    def __call__(self, frame: np.ndarray, frame_idx: int | None = None) -> list[Detection]: ...


FlowEstimator = Callable[[np.ndarray, np.ndarray], np.ndarray]


def write_array(path, arr):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.save(fh, np.asarray(arr), allow_pickle=False)


def read_array(path):
    with open(path, "rb") as fh:
        return np.load(fh, allow_pickle=False)


# ---------------------------------------------------------------------------
# detection


def detect_objects(frame, detector: Detector | None, score_threshold, frame_idx=None) -> list[BoundingBox]:
    """Boxes with confidence strictly above ``score_threshold``, class ids dropped."""
    if detector is None:
        raise AdapterUnavailable(
            "no object detector configured: motion cues cannot stand in for appearance RoIs; "
            "set `detector = off` to run motion-only extraction explicitly"
        )
    H, W = frame.shape[:2]
    out = []
    for det in detector(frame, frame_idx):
        if det.confidence > score_threshold:
            box = det.box.clip(H, W)
            if box is not None:
                out.append(BoundingBox(*box.coords, confidence=det.confidence, source="a"))
    return out


class FileDetector:
    """Reads ``<root>/<clip>/<frame_idx>.det`` handoff files."""

    def __init__(self, root, clip_id):
        self.dir = Path(root) / clip_id

    def __call__(self, frame, frame_idx=None):
        if frame_idx is None:
            raise AdapterUnavailable("FileDetector needs the frame index")
        path = self.dir / f"{frame_idx}.det"
        if not path.exists():
            raise AdapterUnavailable(f"missing detection file {path}")
        rows = read_array(path).reshape(-1, 6)
        return [
            Detection(box_from_float(*r[:4], confidence=r[4]), float(r[4]), int(r[5]))
            for r in rows
        ]


def write_detections(path, detections):
    rows = [(*d.box.coords, d.confidence, d.class_id) for d in detections]
    write_array(path, np.asarray(rows, dtype=np.float64).reshape(-1, 6))


class KnownObjectDetector:
    """Stand-in detector reporting precomputed per-frame boxes (e.g. from the
    synthetic generator), to emulate a closed-world detector."""

    def __init__(self, boxes_per_frame, confidence=0.9):
        self.boxes = boxes_per_frame
        self.confidence = confidence

    def __call__(self, frame, frame_idx=None):
        return [Detection(BoundingBox(*map(int, b)), self.confidence) for b in self.boxes.get(frame_idx, [])]


# ---------------------------------------------------------------------------
# motion


def temporal_gradient_map(frame_t, frame_prev) -> MotionMap:
    a = np.asarray(frame_t, dtype=np.float32)
    b = np.asarray(frame_prev, dtype=np.float32)
    if a.shape != b.shape:
        raise ValueError(f"frame shapes differ: {a.shape} vs {b.shape}")
    diff = np.abs(a - b)
    if diff.ndim == 3:
        diff = diff.max(axis=-1)
    return MotionMap(diff, "gradient")


def flow_magnitude(flow):
    flow = np.asarray(flow)
    return np.sqrt(flow[..., 0] ** 2 + flow[..., 1] ** 2)


def _gray(frame):
    frame = np.asarray(frame)
    if frame.ndim == 3:
        return cv2.cvtColor(frame.astype(np.uint8), cv2.COLOR_RGB2GRAY)
    return frame.astype(np.uint8)


class BlockMatchingFlow:
    """Integer-displacement flow by exhaustive windowed-SSD search, with a
    forward-backward consistency check that zeroes occluded pixels.

    Sharp at object boundaries on textured content, which is what the
    built-in synthetic data needs; not a substitute for a learned estimator
    on real footage.
    """

    def __init__(self, radius=8, half_window=1, penalty=8, consistency=1):
        self.radius = radius
        self.half_window = half_window
        self.penalty = penalty
        self.consistency = consistency

    def __call__(self, frame_t, frame_next):
        a, b = _gray(frame_t).astype(np.int32), _gray(frame_next).astype(np.int32)
        fw = kernels.block_match(a, b, self.radius, self.half_window, self.penalty)
        if self.consistency is not None:
            bw = kernels.block_match(b, a, self.radius, self.half_window, self.penalty)
            H, W = a.shape
            yy, xx = np.mgrid[:H, :W]
            ty = np.clip(yy + fw[..., 1], 0, H - 1)
            tx = np.clip(xx + fw[..., 0], 0, W - 1)
            err = np.abs(fw + bw[ty, tx]).sum(axis=-1)
            fw[err > self.consistency] = 0
        return fw.astype(np.float32)


class FarnebackFlow:
    """Dense flow from OpenCV's Farneback estimator. Smooth, but it bleeds
    several pixels past object boundaries on small targets."""

    def __init__(self, pyr_scale=0.5, levels=3, winsize=9, iterations=5, poly_n=5, poly_sigma=1.1):
        self.params = (pyr_scale, levels, winsize, iterations, poly_n, poly_sigma, 0)

    def __call__(self, frame_t, frame_next):
        return cv2.calcOpticalFlowFarneback(_gray(frame_t), _gray(frame_next), None, *self.params)


class FileFlow:
    """Reads ``<root>/<clip>/<frame_idx>.flow`` handoff files."""

    def __init__(self, root, clip_id):
        self.dir = Path(root) / clip_id

    def load(self, frame_idx):
        path = self.dir / f"{frame_idx}.flow"
        if not path.exists():
            raise AdapterUnavailable(f"missing flow file {path}")
        return read_array(path)


def flow_map(frame_t, frame_next, estimator: FlowEstimator | None) -> MotionMap:
    if estimator is None:
        raise AdapterUnavailable("no flow estimator configured; use motion = gradient instead")
    if np.shape(frame_t) != np.shape(frame_next):
        raise ValueError("frame shapes differ")
    flow = np.asarray(estimator(frame_t, frame_next), dtype=np.float32)
    if flow.shape != (*np.shape(frame_t)[:2], 2):
        raise ValueError(f"flow estimator returned shape {flow.shape}")
    return MotionMap(flow, "flow")


def sequence_flows(frames, estimator: FlowEstimator | FileFlow | None):
    """Flow for every frame t from the pair (t, t+1); the last frame repeats
    the previous flow. Returns ``(T, H, W, 2)`` float32."""
    T, H, W = frames.shape[:3]
    out = np.zeros((T, H, W, 2), dtype=np.float32)
    if isinstance(estimator, FileFlow):
        for t in range(T):
            out[t] = estimator.load(t)
        return out
    for t in range(T - 1):
        out[t] = flow_map(frames[t], frames[t + 1], estimator).values
    if T > 1:
        out[T - 1] = out[T - 2]
    return out


def sequence_gradients(frames):
    """Temporal-gradient map for every frame t from (t, t-1); frame 0 reuses frame 1's."""
    T = len(frames)
    out = np.zeros(frames.shape[:3], dtype=np.float32)
    for t in range(1, T):
        out[t] = temporal_gradient_map(frames[t], frames[t - 1]).values
    if T > 1:
        out[0] = out[1]
    return out


def export_flows(frames, estimator, root, clip_id):
    for t, flow in enumerate(sequence_flows(frames, estimator)):
        write_array(Path(root) / clip_id / f"{t}.flow", flow)
