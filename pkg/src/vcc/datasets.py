"""Video/ground-truth ingestion and the synthetic moving-shapes dataset.

On-disk layout::

    <root>/<split>/<clip_id>/0000.png, 0001.png, ...   frames, lexicographic order
    <root>/gt/<clip_id>.labels                         one 0/1 per line, per frame
    <root>/gt/<clip_id>/0000.png, ...                  optional masks, nonzero = anomalous

Frames are held as ``uint8`` arrays of shape ``(T, H, W, 3)``; grayscale
input is replicated to three channels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class DatasetError(ValueError):
    pass


@dataclass
class VideoSequence:
    frames: np.ndarray
    id: str = "clip"
    frame_rate: float | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim == 3:
            frames = frames[..., None]
        if frames.ndim != 4 or len(frames) == 0:
            raise DatasetError(f"{self.id}: expected non-empty (T, H, W, C) frames, got {frames.shape}")
        if frames.shape[-1] == 1:
            frames = np.repeat(frames, 3, axis=-1)
        if frames.shape[-1] != 3:
            raise DatasetError(f"{self.id}: unsupported channel count {frames.shape[-1]}")
        self.frames = frames.astype(np.uint8, copy=False)

    def __len__(self):
        return len(self.frames)

    @property
    def shape(self):
        return self.frames.shape[1:3]


@dataclass
class GroundTruth:
    frame_labels: np.ndarray
    pixel_masks: np.ndarray | None = None

    def __post_init__(self):
        self.frame_labels = np.asarray(self.frame_labels, dtype=np.int8)
        if self.pixel_masks is not None:
            self.pixel_masks = np.asarray(self.pixel_masks, dtype=bool)
            if len(self.pixel_masks) != len(self.frame_labels):
                raise DatasetError("pixel_masks and frame_labels differ in length")
            has_px = self.pixel_masks.reshape(len(self.pixel_masks), -1).any(axis=1)
            if np.any(has_px & (self.frame_labels == 0)):
                raise DatasetError("frame with a nonempty pixel mask is labelled normal")


def _as_rgb(img, path):
    if img is None:
        raise DatasetError(f"cannot decode {path}")
    if img.ndim == 2:
        return np.repeat(img[..., None], 3, axis=-1)
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def load_sequence(path, clip_id=None) -> VideoSequence:
    """Load a directory of frame images (lexicographic order) or a video file."""
    path = Path(path)
    clip_id = clip_id or path.stem
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_EXTS)
        if not files:
            raise DatasetError(f"no frame images in {path}")
        frames = []
        for f in files:
            img = _as_rgb(cv2.imread(str(f), cv2.IMREAD_UNCHANGED), f)
            if frames and img.shape != frames[0].shape:
                raise DatasetError(f"{f}: frame size {img.shape} differs from {frames[0].shape}")
            frames.append(img)
        return VideoSequence(np.stack(frames), id=clip_id)
    if path.is_file():
        cap = cv2.VideoCapture(str(path))
        if not cap.isOpened():
            raise DatasetError(f"cannot open video {path}")
        fps = cap.get(cv2.CAP_PROP_FPS) or None
        frames = []
        while True:
            ok, img = cap.read()
            if not ok:
                break
            frames.append(_as_rgb(img, path))
        cap.release()
        if not frames:
            raise DatasetError(f"no decodable frames in {path}")
        return VideoSequence(np.stack(frames), id=clip_id, frame_rate=fps)
    raise DatasetError(f"unreadable path {path}")


def frame_name(i, ext=".png"):
    return f"{i:04d}{ext}"


def save_sequence(seq: VideoSequence, directory, ext=".png"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        cv2.imwrite(str(directory / frame_name(i, ext)), cv2.cvtColor(frame, cv2.COLOR_RGB2BGR))


def save_ground_truth(gt: GroundTruth, gt_dir, clip_id):
    gt_dir = Path(gt_dir)
    gt_dir.mkdir(parents=True, exist_ok=True)
    (gt_dir / f"{clip_id}.labels").write_text("".join(f"{int(v)}\n" for v in gt.frame_labels))
    if gt.pixel_masks is not None:
        mdir = gt_dir / clip_id
        mdir.mkdir(exist_ok=True)
        for i, m in enumerate(gt.pixel_masks):
            cv2.imwrite(str(mdir / frame_name(i)), m.astype(np.uint8) * 255)


def load_ground_truth(gt_dir, clip_id, n_frames=None) -> GroundTruth:
    gt_dir = Path(gt_dir)
    label_file = gt_dir / f"{clip_id}.labels"
    if not label_file.exists():
        raise DatasetError(f"missing label file {label_file}")
    labels = np.array([int(s) for s in label_file.read_text().split()], dtype=np.int8)
    if n_frames is not None and len(labels) != n_frames:
        raise DatasetError(f"{label_file}: {len(labels)} labels for {n_frames} frames")
    masks = None
    mdir = gt_dir / clip_id
    if mdir.is_dir():
        files = sorted(p for p in mdir.iterdir() if p.suffix.lower() in IMAGE_EXTS)
        masks = np.stack([cv2.imread(str(f), cv2.IMREAD_GRAYSCALE) > 0 for f in files])
    return GroundTruth(labels, masks)


def list_clips(root, split):
    d = Path(root) / split
    if not d.is_dir():
        raise DatasetError(f"missing split directory {d}")
    return sorted(p.name for p in d.iterdir() if p.is_dir())


def load_split(root, split, with_gt=True):
    """Return ``[(VideoSequence, GroundTruth | None), ...]`` for every clip in a split."""
    out = []
    for clip_id in list_clips(root, split):
        seq = load_sequence(Path(root) / split / clip_id, clip_id)
        gt = None
        if with_gt and (Path(root) / "gt" / f"{clip_id}.labels").exists():
            gt = load_ground_truth(Path(root) / "gt", clip_id, len(seq))
        out.append((seq, gt))
    return out


# ---------------------------------------------------------------------------
# synthetic moving shapes


@dataclass(frozen=True)
class Motif:
    """A textured shape moving at constant speed, bouncing off the canvas edges.

    ``start``/``end`` bound the frames (inclusive) on which it is drawn;
    ``position`` is the initial top-left corner, drawn from the seed if None.
    """

    shape: str = "square"
    size: int = 12
    speed: float = 1.0
    direction: float = 0.0
    intensity: int = 180
    start: int = 0
    end: int | None = None
    position: tuple[float, float] | None = None

    @property
    def kind(self):
        return (self.shape, self.size, self.speed, self.direction)


@dataclass
class SyntheticSpec:
    height: int = 96
    width: int = 128
    n_frames: int = 100
    normal: list[Motif] = field(default_factory=list)
    anomalies: list[Motif] = field(default_factory=list)
    seed: int = 0
    clip_id: str = "synthetic"
    background_contrast: int = 12


def shape_mask(shape, size):
    yy, xx = np.mgrid[:size, :size] + 0.5
    c = size / 2.0
    if shape == "square":
        return np.ones((size, size), dtype=bool)
    if shape == "circle":
        return (yy - c) ** 2 + (xx - c) ** 2 <= c * c
    if shape == "diamond":
        return np.abs(yy - c) + np.abs(xx - c) <= c
    if shape == "triangle":
        return np.abs(xx - c) <= yy / 2.0
    if shape == "cross":
        t = max(size // 6, 1)
        return (np.abs(yy - c) <= t) | (np.abs(xx - c) <= t)
    raise DatasetError(f"unknown motif shape {shape!r}")


def _trajectory(m: Motif, n_frames, H, W, rng):
    """Integer top-left positions for every frame, bouncing at the edges."""
    if m.position is None:
        x, y = rng.uniform(0, W - m.size), rng.uniform(0, H - m.size)
    else:
        x, y = map(float, m.position)
    theta = np.deg2rad(m.direction)
    vx, vy = m.speed * np.cos(theta), m.speed * np.sin(theta)
    vx, vy = round(vx, 9), round(vy, 9)
    pos = np.empty((n_frames, 2), dtype=np.int64)
    xmax, ymax = W - m.size, H - m.size
    for t in range(n_frames):
        pos[t] = (int(round(x)), int(round(y)))
        x, y = x + vx, y + vy
        if x < 0:
            x, vx = -x, -vx
        elif x > xmax:
            x, vx = 2 * xmax - x, -vx
        if y < 0:
            y, vy = -y, -vy
        elif y > ymax:
            y, vy = 2 * ymax - y, -vy
    return pos


def generate_synthetic(spec: SyntheticSpec):
    """Render a clip and its exact ground truth; fully determined by ``spec.seed``.

    Returns ``(VideoSequence, GroundTruth, extents)`` where ``extents`` maps
    ``(motif_index, is_anomaly)`` to a ``(T, 4)`` array of per-frame boxes
    (``x1, y1, x2, y2``, end-exclusive; all ``-1`` on frames it is absent).
    """
    H, W, T = spec.height, spec.width, spec.n_frames
    normal_kinds = {m.kind for m in spec.normal}
    for m in spec.anomalies:
        if m.kind in normal_kinds:
            raise DatasetError(f"anomaly motif {m.kind} duplicates a normal motif")
    for m in list(spec.normal) + list(spec.anomalies):
        if m.size > min(H, W):
            raise DatasetError(f"motif of size {m.size} does not fit a {H}x{W} canvas")

    rng = np.random.default_rng(spec.seed)
    bg = 90 + rng.integers(-spec.background_contrast, spec.background_contrast + 1, size=(H, W))
    bg = cv2.GaussianBlur(bg.astype(np.float32), (5, 5), 1.0)

    frames = np.repeat(bg[None], T, axis=0)
    masks = np.zeros((T, H, W), dtype=bool)
    extents = {}
    layers = [(m, False) for m in spec.normal] + [(m, True) for m in spec.anomalies]
    for idx, (m, is_anom) in enumerate(layers):
        shape = shape_mask(m.shape, m.size)
        texture = m.intensity + rng.integers(-40, 41, size=(m.size, m.size))
        texture = cv2.GaussianBlur(texture.astype(np.float32), (3, 3), 0.8)
        pos = _trajectory(m, T, H, W, rng)
        end = T - 1 if m.end is None else min(m.end, T - 1)
        ext = np.full((T, 4), -1, dtype=np.int64)
        for t in range(max(m.start, 0), end + 1):
            x, y = pos[t]
            region = frames[t, y : y + m.size, x : x + m.size]
            region[shape] = texture[shape]
            ext[t] = (x, y, x + m.size, y + m.size)
            if is_anom:
                masks[t, y : y + m.size, x : x + m.size] |= shape
        key = (idx - len(spec.normal) if is_anom else idx, is_anom)
        extents[key] = ext

    frames = np.clip(np.rint(frames), 0, 255).astype(np.uint8)
    labels = masks.reshape(T, -1).any(axis=1).astype(np.int8)
    seq = VideoSequence(frames[..., None], id=spec.clip_id)
    return seq, GroundTruth(labels, masks), extents


def lane_positions(size, n_lanes=4):
    """Top edges of horizontal lanes separated by one object size."""
    return [size // 2 + k * 2 * size for k in range(n_lanes)]


def default_normal_motifs(rng, width, lanes, size, speed=2.0):
    """Slow textured squares, one per horizontal lane: the 'normal' behaviour."""
    out = []
    for k, y in enumerate(lanes):
        x = float(rng.integers(0, width - size))
        out.append(Motif("square", size, speed, 0.0 if k % 2 == 0 else 180.0,
                         intensity=165 + 20 * (k % 3), position=(x, float(y))))
    return out


def synthetic_splits(seed=0, n_train=4, n_test=2, n_frames=100, size=24, width=None, speed=2.0):
    """Specs for a normal-only training split and mixed test clips.

    Four lanes; normal squares occupy the first three. Test anomalies run in
    the free lane: a fast square on frames 40-60 and a bright novel circle on
    frames 70-85.
    """
    rng = np.random.default_rng(seed)
    lanes = lane_positions(size)
    height = 8 * size
    width = width or 10 * size
    train = [
        SyntheticSpec(height, width, n_frames, default_normal_motifs(rng, width, lanes[:3], size, speed), [],
                      seed=seed * 1000 + k, clip_id=f"train_{k:02d}")
        for k in range(n_train)
    ]
    test = []
    free = float(lanes[3])
    for k in range(n_test):
        anomalies = [
            Motif("square", size, 3.5 * speed, 0.0, intensity=175, start=40, end=60, position=(4.0, free)),
            Motif("circle", size, speed, 180.0, intensity=235, start=70, end=85,
                  position=(float(width - size - 4), free)),
        ]
        test.append(SyntheticSpec(height, width, n_frames,
                                  default_normal_motifs(rng, width, lanes[:3], size, speed), anomalies,
                                  seed=seed * 1000 + 500 + k, clip_id=f"test_{k:02d}"))
    return train, test


def write_synthetic_dataset(root, seed=0, **kw):
    """Render :func:`synthetic_splits` into the on-disk dataset layout."""
    root = Path(root)
    train, test = synthetic_splits(seed, **kw)
    for split, specs in (("train", train), ("test", test)):
        for spec in specs:
            seq, gt, _ = generate_synthetic(spec)
            save_sequence(seq, root / split / spec.clip_id)
            save_ground_truth(gt, root / "gt", spec.clip_id)
    return root

