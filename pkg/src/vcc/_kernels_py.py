"""Pure numpy/scipy versions of the compiled kernels.

Both implementations must agree exactly; ``tests/test_kernels.py`` checks
them against each other and against independent oracles.
"""
import numpy as np
from scipy import ndimage

_EIGHT = np.ones((3, 3), dtype=bool)


def component_boxes(mask):
    """Bounding boxes ``(x1, y1, x2, y2)`` of the 8-connected components of ``mask``.

    End coordinates are exclusive, so a 20x20 blob has area 400. Components
    are ordered by the raster position of their first pixel.
    """
    mask = np.asarray(mask).astype(bool)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    out = np.empty((n, 4), dtype=np.int64)
    # ndimage.label numbers components in raster order of first pixel
    for k, sl in enumerate(ndimage.find_objects(labels)):
        ys, xs = sl
        out[k] = (xs.start, ys.start, xs.stop, ys.stop)
    return out


def resize_bilinear(img, out_h, out_w):
    """Bilinear resize of an ``H x W x C`` array using half-pixel centres
    (the ``cv2.INTER_LINEAR`` convention). Same size in means same array out."""
    src = np.asarray(img, dtype=np.float64)
    H, W = src.shape[:2]

    def axis(n_out, n_in):
        f = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        f = np.maximum(f, 0.0)
        i0 = np.minimum(np.floor(f).astype(np.intp), n_in - 1)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, f - i0

    y0, y1, wy = axis(out_h, H)
    x0, x1, wx = axis(out_w, W)
    wy = wy[:, None, None]
    wx = wx[None, :, None]
    top = (1 - wx) * src[y0][:, x0] + wx * src[y0][:, x1]
    bot = (1 - wx) * src[y1][:, x0] + wx * src[y1][:, x1]
    return (1 - wy) * top + wy * bot


def displacement_order(radius):
    """Candidate ``(dx, dy)`` pairs: zero first, then raster order."""
    rng = range(-radius, radius + 1)
    return [(0, 0)] + [(dx, dy) for dy in rng for dx in rng if (dx, dy) != (0, 0)]


def block_match(a, b, radius, half_window, penalty):
    """Integer displacement of each pixel of ``a`` into ``b`` minimising the
    windowed SSD plus ``penalty * (|dx| + |dy|)``; replicated borders.

    Zero displacement is tried first and only strictly lower costs replace
    the incumbent, so static texture maps to zero flow.
    """
    A = np.asarray(a, dtype=np.int64)
    B = np.asarray(b, dtype=np.int64)
    H, W = A.shape
    win = np.arange(-half_window, half_window + 1)
    ys, xs = np.arange(H), np.arange(W)
    sy = np.clip(ys[:, None] + win[None, :], 0, H - 1)
    sx = np.clip(xs[:, None] + win[None, :], 0, W - 1)
    # window pixel coordinates for every pixel, borders replicated: (H*W, k*k)
    wy = np.clip(np.arange(H)[:, None, None] + win[None, :, None], 0, H - 1)
    wx = np.clip(np.arange(W)[:, None, None] + win[None, None, :], 0, W - 1)
    wy = np.broadcast_to(wy[:, None], (H, W, len(win), len(win))).reshape(H * W, -1)
    wx = np.broadcast_to(wx[None], (H, W, len(win), len(win))).reshape(H * W, -1)
    Aw = A[wy, wx]
    best = ((Aw - B[wy, wx]) ** 2).sum(axis=1)
    out = np.zeros((H * W, 2), dtype=np.int32)
    for dx, dy in displacement_order(radius)[1:]:
        pen = penalty * (abs(dx) + abs(dy))
        # a pixel whose cost is already <= the penalty cannot strictly improve
        idx = np.flatnonzero(best > pen)
        if idx.size == 0:
            continue
        if idx.size > H * W // 4:
            # dense separable window sums beat per-pixel gathers here
            shifted = B[np.clip(ys + dy, 0, H - 1)][:, np.clip(xs + dx, 0, W - 1)]
            sq = (A - shifted) ** 2
            cost = sq[:, sx].sum(axis=-1)[sy].sum(axis=1).ravel()[idx] + pen
        else:
            ty = np.clip(wy[idx] + dy, 0, H - 1)
            tx = np.clip(wx[idx] + dx, 0, W - 1)
            cost = ((Aw[idx] - B[ty, tx]) ** 2).sum(axis=1) + pen
        better = cost < best[idx]
        best[idx[better]] = cost[better]
        out[idx[better]] = (dx, dy)
    return out.reshape(H, W, 2)
