"""ROC, AUC and EER at frame and pixel level.

Pixel level: at threshold ``t`` an anomalous frame is a true positive when
more than 40% of its ground-truth pixels have map value above ``t``, and a
normal frame is a false positive when any pixel does. Both conditions are
``critical > t`` for a per-frame critical value (the k-th largest map value
inside the mask, or the map maximum), so the pixel ROC is the frame ROC of
the critical values.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

PIXEL_FRACTION = 0.4


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    eer: float

    def save(self, path):
        np.savetxt(path, np.column_stack([self.thresholds, self.fpr, self.tpr]),
                   header=f"threshold fpr tpr  auc={self.auc:.6f} eer={self.eer:.6f}")


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    if scores.shape != labels.shape:
        raise ValueError(f"{len(scores)} scores for {len(labels)} labels")
    if labels.all() or not labels.any():
        raise ValueError("labels contain a single class; ROC is undefined")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return scores, labels


def roc_curve(scores, labels):
    """Sweep every unique score as a threshold (``score >= t`` is positive),
    from the largest down; the curve starts at (0, 0) with threshold +inf."""
    scores, labels = _check(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]  # end of each tie group
    tp = np.cumsum(y)[last]
    fp = np.cumsum(~y)[last]
    tpr = np.r_[0.0, tp / y.sum()]
    fpr = np.r_[0.0, fp / (~y).sum()]
    return np.r_[np.inf, s[last]], fpr, tpr


def auc_trapezoid(fpr, tpr):
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))


def equal_error_rate(fpr, tpr):
    """FPR where FPR = 1 - TPR, interpolating linearly between curve points."""
    g = fpr - (1 - tpr)  # non-decreasing along the sweep, -1 at start, 1 at end
    k = int(np.flatnonzero(g >= 0)[0])
    if g[k] == 0 or k == 0:
        return float(fpr[k])
    a = g[k - 1] / (g[k - 1] - g[k])
    return float(fpr[k - 1] + a * (fpr[k] - fpr[k - 1]))


def roc_from_scores(scores, labels) -> RocCurve:
    thr, fpr, tpr = roc_curve(scores, labels)
    return RocCurve(thr, fpr, tpr, auc_trapezoid(fpr, tpr), equal_error_rate(fpr, tpr))


def frame_level_roc(scores, frame_labels) -> RocCurve:
    return roc_from_scores(scores, frame_labels)


def critical_scores(maps, masks, frame_labels, fraction=PIXEL_FRACTION):
    """Per-frame critical value for the pixel-level criterion (see module doc)."""
    labels = np.asarray(frame_labels).astype(bool)
    if len(maps) != len(labels):
        raise ValueError("one map per frame is required")
    if masks is None and labels.any():
        raise ValueError("pixel-level evaluation needs ground-truth masks")
    out = np.empty(len(labels))
    for t, pos in enumerate(labels):
        m = np.asarray(maps[t])
        if not pos:
            out[t] = m.max()
            continue
        inside = m[np.asarray(masks[t], dtype=bool)]
        if inside.size == 0:
            raise ValueError(f"frame {t} is labelled anomalous but its mask is empty")
        k = int(np.floor(fraction * inside.size)) + 1  # need more than fraction*|gt| pixels
        out[t] = np.partition(inside, inside.size - k)[inside.size - k]
    return out


def pixel_level_roc(maps, masks, frame_labels) -> RocCurve:
    return roc_from_scores(critical_scores(maps, masks, frame_labels), frame_labels)


def plot_roc(curves: dict, path, title="ROC"):
    """Render ``{label: RocCurve}`` to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for name, c in curves.items():
        ax.plot(c.fpr, c.tpr, label=f"{name} (AUC {c.auc:.3f})")
    ax.plot([0, 1], [0, 1], ls=":", c="grey", lw=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
