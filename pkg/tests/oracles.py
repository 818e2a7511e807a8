"""Independent reference implementations used only by the tests."""
from collections import deque
from fractions import Fraction

import numpy as np


def flood_fill_boxes(mask):
    """8-connected component boxes by BFS, in raster order of first pixel."""
    mask = np.asarray(mask, dtype=bool)
    H, W = mask.shape
    seen = np.zeros_like(mask)
    out = []
    for y in range(H):
        for x in range(W):
            if not mask[y, x] or seen[y, x]:
                continue
            seen[y, x] = True
            q = deque([(y, x)])
            y1, x1, y2, x2 = y, x, y, x
            while q:
                cy, cx = q.popleft()
                y1, y2, x1, x2 = min(y1, cy), max(y2, cy), min(x1, cx), max(x2, cx)
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < H and 0 <= nx < W and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            q.append((ny, nx))
            out.append((x1, y1, x2 + 1, y2 + 1))
    return out


def overlap_argmax(box, H, W, rows, cols):
    """All blocks attaining the maximal exact overlap area with ``box``."""
    x1, y1, x2, y2 = box
    areas = []
    for r in range(rows):
        for c in range(cols):
            bx1, bx2 = Fraction(c * W, cols), Fraction((c + 1) * W, cols)
            by1, by2 = Fraction(r * H, rows), Fraction((r + 1) * H, rows)
            ix = max(Fraction(0), min(bx2, x2) - max(bx1, x1))
            iy = max(Fraction(0), min(by2, y2) - max(by1, y1))
            areas.append(ix * iy)
    best = max(areas)
    return [k for k, a in enumerate(areas) if a == best]


def ssim_direct(x, y, c1, c2):
    """Scalar-loop SSIM with global statistics (population moments)."""
    xs = [float(v) for v in np.ravel(x)]
    ys = [float(v) for v in np.ravel(y)]
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    vx = sum((a - mx) ** 2 for a in xs) / n
    vy = sum((b - my) ** 2 for b in ys) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(xs, ys)) / n
    return ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))


def pair_auc(scores, labels):
    """P(s+ > s-) + 0.5 P(s+ = s-) by enumerating all pairs."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


def scalar_lstm(p, h, c, w):
    """One step of a 1x1, single-channel conv LSTM written out by hand.

    ``w`` maps gate name to (w_p, w_h, b).
    """
    import math

    sig = lambda z: 1.0 / (1.0 + math.exp(-z))
    e = sig(w["e"][0] * p + w["e"][1] * h + w["e"][2])
    f = sig(w["f"][0] * p + w["f"][1] * h + w["f"][2])
    o = sig(w["o"][0] * p + w["o"][1] * h + w["o"][2])
    g = math.tanh(w["c"][0] * p + w["c"][1] * h + w["c"][2])
    c_new = f * c + e * g
    return o * math.tanh(c_new), c_new
