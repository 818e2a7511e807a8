"""Anomaly scores from completion errors.

Per event: one score per test type and modality, averaged over types,
then the two modalities are standardised with training statistics and
summed with weights. Per frame: the maximum over its events, then causal
smoothing of the series.

SSIM is a similarity, so it enters the score as ``1 - SSIM``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from . import kernels
from .models import flows_to_net, patches_to_net
from .training import ModelSet, ScoreStats

RECT_SCHEMES = ("none", "decay", "average", "gaussian", "median")


@dataclass
class MetricConfig:
    ssim_weight: float = 1.0
    L_a: float = 2.0  # value range at network scale
    L_m: float = 2.0
    w_a: float = 1.0
    w_m: float = 1.0
    rect_scheme: str = "average"
    W: int = 5
    q: float = 0.8
    sigma: float = 1.0
    batch_size: int = 256

    def __post_init__(self):
        if self.ssim_weight < 0:
            raise ValueError("SSIM weight must be >= 0")
        if self.W < 0:
            raise ValueError("window W must be >= 0")
        if self.w_a < 0 or self.w_m < 0 or self.w_a + self.w_m == 0:
            raise ValueError("fusion weights must be >= 0 and not both zero")
        if self.rect_scheme not in RECT_SCHEMES:
            raise ValueError(f"unknown rectification scheme {self.rect_scheme!r}")


# ---------------------------------------------------------------------------
# metrics; leading axes are batch axes, the last three are one patch


def _flat(x):
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(*x.shape[:-3], -1) if x.ndim >= 3 else x.reshape(1, -1)[0]


def mse(pred, target):
    d = _flat(pred) - _flat(target)
    return (d * d).mean(axis=-1)


def ssim_constants(L):
    return (0.01 * L) ** 2, (0.03 * L) ** 2


def ssim(pred, target, c1=None, c2=None, L=2.0):
    """SSIM with a single window covering the whole patch."""
    if c1 is None or c2 is None:
        c1, c2 = ssim_constants(L)
    x, y = _flat(pred), _flat(target)
    mx, my = x.mean(axis=-1), y.mean(axis=-1)
    vx = ((x - mx[..., None]) ** 2).mean(axis=-1)
    vy = ((y - my[..., None]) ** 2).mean(axis=-1)
    cov = ((x - mx[..., None]) * (y - my[..., None])).mean(axis=-1)
    return ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))


def mixed_score(pred, target, ssim_weight=1.0, L=2.0):
    """``MSE + weight * (1 - SSIM)``."""
    out = mse(pred, target)
    if ssim_weight:
        out = out + ssim_weight * (1.0 - ssim(pred, target, L=L))
    return out


def type_ensemble(per_type_scores):
    """Mean over the last axis (the test types)."""
    return np.asarray(per_type_scores, dtype=np.float64).mean(axis=-1)


def modality_fuse(S_a, S_m, stats: ScoreStats, w_a, w_m):
    S_a = np.asarray(S_a, dtype=np.float64)
    out = w_a * (S_a - stats.mean_a) / stats.std_a
    if w_m:
        out = out + w_m * (np.asarray(S_m, dtype=np.float64) - stats.mean_m) / stats.std_m
    return out


# ---------------------------------------------------------------------------
# event scoring


@dataclass
class EventScores:
    per_type_a: np.ndarray  # (N, D)
    per_type_m: np.ndarray | None
    S_a: np.ndarray
    S_m: np.ndarray | None
    model_block: np.ndarray  # block whose models scored each event
    error_maps: np.ndarray | None  # (N, h, w) appearance error, mean over types
    S: np.ndarray | None = None


def _predict(net, x, batch_size):
    p = next(net.parameters())
    outs = []
    with torch.no_grad():
        for s in range(0, len(x), batch_size):
            outs.append(net(x[s : s + batch_size].to(p.device, p.dtype)).cpu())
    return torch.cat(outs) if outs else x.new_zeros((0,))


def score_events(model_set: ModelSet, events, metric: MetricConfig, with_maps=True,
                 modalities=None) -> EventScores:
    """Per-type and ensemble scores for every event, at network scale."""
    N, D = len(events), events.patches.shape[1]
    if D != model_set.D:
        raise ValueError(f"events have D={D}, models D={model_set.D}")
    modalities = modalities or model_set.modalities()
    use_m = "motion" in modalities
    if use_m and events.flows is None:
        raise ValueError("motion scoring needs flow stacks")
    h, w = events.patches.shape[2:4]
    per_a = np.zeros((N, D))
    per_m = np.zeros((N, D)) if use_m else None
    maps = np.zeros((N, h, w), np.float32) if with_maps else None
    model_block = np.zeros(N, np.int64)
    for block in np.unique(events.block_idx):
        idx = np.flatnonzero(events.block_idx == block)
        mb_a = model_set.resolve_block(int(block), "appearance")
        model_block[idx] = mb_a
        x_all = patches_to_net(events.patches[idx])
        for i in range(1, D + 1):
            keep = [k for k in range(D) if k != i - 1]
            x = x_all[:, keep]
            net = model_set.get(mb_a, "appearance", i)
            pred = _predict(net, x, metric.batch_size)
            target = x_all[:, i - 1]
            per_a[idx, i - 1] = mixed_score(pred.numpy(), target.numpy(), metric.ssim_weight, metric.L_a)
            if with_maps:
                maps[idx] += ((pred - target) ** 2).sum(dim=1).numpy() / D
            if use_m:
                mb_m = model_set.resolve_block(int(block), "motion")
                net = model_set.get(mb_m, "motion", i)
                pred = _predict(net, x, metric.batch_size)
                target = flows_to_net(events.flows[idx][:, i - 1], net.spec.flow_scale)
                per_m[idx, i - 1] = mixed_score(pred.numpy(), target.numpy(), metric.ssim_weight, metric.L_m)
    return EventScores(
        per_a, per_m, type_ensemble(per_a), None if per_m is None else type_ensemble(per_m), model_block, maps
    )


def fuse_event_scores(scored: EventScores, stats: dict, metric: MetricConfig, w_a=None, w_m=None):
    """Fused score per event with the stats of the block that scored it."""
    w_a = metric.w_a if w_a is None else w_a
    w_m = metric.w_m if w_m is None else w_m
    if scored.S_m is None:
        w_m = 0.0
    S = np.zeros(len(scored.S_a))
    for block in np.unique(scored.model_block):
        m = scored.model_block == block
        S[m] = modality_fuse(scored.S_a[m], None if scored.S_m is None else scored.S_m[m],
                             stats[int(block)], w_a, w_m)
    return S


# ---------------------------------------------------------------------------
# frame series


def frame_scores(frame_idx, event_scores, n_frames, first_valid=0):
    """Max over each frame's events.

    Frames without events from ``first_valid`` on get the clip's minimum
    over event-bearing frames; earlier frames (which cannot hold events)
    copy the score of frame ``first_valid``. A clip with no events at all
    scores zero everywhere.
    """
    frame_idx = np.asarray(frame_idx, dtype=np.int64)
    event_scores = np.asarray(event_scores, dtype=np.float64)
    out = np.full(n_frames, -np.inf)
    np.maximum.at(out, frame_idx, event_scores)
    has = np.isfinite(out)
    if not has.any():
        return np.zeros(n_frames)
    out[~has] = out[has].min()
    first_valid = min(max(first_valid, 0), n_frames - 1)
    out[:first_valid] = out[first_valid]
    return out


def rectify_weights(scheme, W, q=0.8, sigma=1.0):
    m = np.arange(W + 1, dtype=np.float64)
    if scheme == "decay":
        return q**m
    if scheme == "average":
        return np.ones(W + 1)
    if scheme == "gaussian":
        return np.exp(-(m**2) / (2 * sigma**2))
    raise ValueError(f"no weights for scheme {scheme!r}")


def rectify(series, scheme="average", W=5, q=0.8, sigma=1.0):
    """Causal smoothing over the current and up to ``W`` previous frames.

    Weighted schemes divide by the weights actually used, so windows cut off
    at the clip start stay normalised. ``median`` is the plain median of the
    same window.
    """
    s = np.asarray(series, dtype=np.float64)
    if scheme == "none" or W == 0 or len(s) == 0:
        return s.copy()
    n = len(s)
    if scheme == "median":
        return np.array([np.median(s[max(0, l - W) : l + 1]) for l in range(n)])
    w = rectify_weights(scheme, W, q, sigma)
    # s_l + sum_m w_m (s_{l-m} - s_l) / Z: the same average, but exact on flat stretches
    dev = np.zeros(n)
    Z = np.full(n, w[0])
    for m in range(1, min(W, n - 1) + 1):
        dev[m:] += w[m] * (s[: n - m] - s[m:])
        Z[m:] += w[m]
    return s + dev / Z


@dataclass
class ScoreSeries:
    raw: np.ndarray
    rectified: np.ndarray

    def __post_init__(self):
        if len(self.raw) != len(self.rectified):
            raise ValueError("raw and rectified series differ in length")

    def __len__(self):
        return len(self.raw)


def score_series(frame_idx, event_scores, n_frames, metric: MetricConfig, first_valid=0) -> ScoreSeries:
    raw = frame_scores(frame_idx, event_scores, n_frames, first_valid)
    return ScoreSeries(raw, rectify(raw, metric.rect_scheme, metric.W, metric.q, metric.sigma))


# ---------------------------------------------------------------------------
# pixel maps


def paste_error_maps(error_maps, boxes, frame_idx, n_frames, frame_shape, out=None):
    """Full-frame anomaly maps: each event's map resized to its box, max on overlap."""
    H, W = frame_shape
    if out is None:
        out = np.zeros((n_frames, H, W), np.float32)
    for emap, (x1, y1, x2, y2), t in zip(error_maps, boxes, frame_idx):
        patch = kernels.resize_bilinear(np.asarray(emap, np.float64)[..., None], int(y2 - y1), int(x2 - x1))[..., 0]
        region = out[t, y1:y2, x1:x2]
        np.maximum(region, patch.astype(np.float32), out=region)
    return out


def paste_score_maps(event_scores, boxes, frame_idx, n_frames, frame_shape):
    """Full-frame maps holding each event's fused score over its box.

    Pixels outside every box get the clip's lowest event score, the same
    baseline that event-free frames receive in the frame series.
    """
    event_scores = np.asarray(event_scores, dtype=np.float64)
    base = event_scores.min() if len(event_scores) else 0.0
    out = np.full((n_frames, *frame_shape), base, np.float32)
    for s, (x1, y1, x2, y2), t in zip(event_scores, boxes, frame_idx):
        region = out[t, y1:y2, x1:x2]
        np.maximum(region, s, out=region)
    return out
