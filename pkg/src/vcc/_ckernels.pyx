# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for event extraction.

Mirrors :mod:`vcc._kernels_py` exactly; see that module for the contracts.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t root = i
    while parent[root] != root:
        root = parent[root]
    cdef Py_ssize_t nxt
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


cdef inline void _union(Py_ssize_t[::1] parent, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def component_boxes(mask):
    """Bounding boxes ``(x1, y1, x2, y2)`` (end-exclusive) of 8-connected
    components, ordered by the raster position of each component's first pixel."""
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t H = m.shape[0], W = m.shape[1]
    cdef Py_ssize_t[:, ::1] lab = np.zeros((H, W), dtype=np.intp)
    # worst case: one provisional label per pixel
    cdef Py_ssize_t[::1] parent = np.zeros(H * W + 1, dtype=np.intp)
    cdef Py_ssize_t y, x, nxt = 1, cur, nb
    cdef int k
    cdef Py_ssize_t dy[4]
    cdef Py_ssize_t dx[4]
    dy[0] = 0; dx[0] = -1
    dy[1] = -1; dx[1] = -1
    dy[2] = -1; dx[2] = 0
    dy[3] = -1; dx[3] = 1

    with nogil:
        for y in range(H):
            for x in range(W):
                if m[y, x] == 0:
                    continue
                cur = 0
                for k in range(4):
                    if y + dy[k] < 0 or x + dx[k] < 0 or x + dx[k] >= W:
                        continue
                    nb = lab[y + dy[k], x + dx[k]]
                    if nb == 0:
                        continue
                    if cur == 0:
                        cur = nb
                    else:
                        _union(parent, cur, nb)
                if cur == 0:
                    parent[nxt] = nxt
                    cur = nxt
                    nxt += 1
                lab[y, x] = cur

    # roots are the smallest provisional label in each set, and provisional
    # labels grow in raster order, so root order == first-pixel order
    cdef Py_ssize_t[::1] slot = np.full(nxt, -1, dtype=np.intp)
    cdef Py_ssize_t n = 0, r
    for cur in range(1, nxt):
        r = _find(parent, cur)
        if slot[r] < 0:
            slot[r] = n
            n += 1
    out_arr = np.empty((n, 4), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    for r in range(n):
        out[r, 0] = W
        out[r, 1] = H
        out[r, 2] = 0
        out[r, 3] = 0
    with nogil:
        for y in range(H):
            for x in range(W):
                cur = lab[y, x]
                if cur == 0:
                    continue
                r = slot[_find(parent, cur)]
                if x < out[r, 0]:
                    out[r, 0] = x
                if y < out[r, 1]:
                    out[r, 1] = y
                if x + 1 > out[r, 2]:
                    out[r, 2] = x + 1
                if y + 1 > out[r, 3]:
                    out[r, 3] = y + 1
    return out_arr


def resize_bilinear(img, Py_ssize_t out_h, Py_ssize_t out_w):
    """Bilinear resize of an ``H x W x C`` float array with half-pixel centres."""
    cdef double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t H = src.shape[0], W = src.shape[1], C = src.shape[2]
    out_arr = np.empty((out_h, out_w, C), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double sy = <double>H / out_h, sx = <double>W / out_w
    cdef double fy, fx, wy, wx
    cdef Py_ssize_t i, j, c, y0, y1, x0, x1
    with nogil:
        for i in range(out_h):
            fy = (i + 0.5) * sy - 0.5
            if fy < 0:
                fy = 0
            y0 = <Py_ssize_t>floor(fy)
            if y0 > H - 1:
                y0 = H - 1
            y1 = y0 + 1 if y0 < H - 1 else y0
            wy = fy - y0
            for j in range(out_w):
                fx = (j + 0.5) * sx - 0.5
                if fx < 0:
                    fx = 0
                x0 = <Py_ssize_t>floor(fx)
                if x0 > W - 1:
                    x0 = W - 1
                x1 = x0 + 1 if x0 < W - 1 else x0
                wx = fx - x0
                for c in range(C):
                    if wy == 0 and wx == 0:
                        out[i, j, c] = src[y0, x0, c]
                    else:
                        out[i, j, c] = ((1 - wy) * ((1 - wx) * src[y0, x0, c] + wx * src[y0, x1, c])
                                        + wy * ((1 - wx) * src[y1, x0, c] + wx * src[y1, x1, c]))
    return out_arr


cdef inline Py_ssize_t _clamp(Py_ssize_t v, Py_ssize_t n) noexcept nogil:
    if v < 0:
        return 0
    if v >= n:
        return n - 1
    return v


def block_match(a, b, int radius, int half_window, long penalty):
    """Integer displacement minimising windowed SSD plus ``penalty * (|dx|+|dy|)``.

    ``a`` and ``b`` are integer images; borders replicate. Zero displacement
    is tried first and only a strictly lower cost replaces the incumbent.
    Returns an ``(H, W, 2)`` int32 array of ``(dx, dy)``.
    """
    cdef cnp.int32_t[:, ::1] A = np.ascontiguousarray(a, dtype=np.int32)
    cdef cnp.int32_t[:, ::1] B = np.ascontiguousarray(b, dtype=np.int32)
    cdef Py_ssize_t H = A.shape[0], W = A.shape[1]
    out_arr = np.zeros((H, W, 2), dtype=np.int32)
    cdef cnp.int32_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t[:, ::1] disps = _displacement_order(radius)
    cdef Py_ssize_t y, x, i, j, k, n_disp = disps.shape[0], yy
    cdef int dx, dy
    cdef long long d, s, pen, best
    with nogil:
        for y in range(H):
            for x in range(W):
                best = -1
                for k in range(n_disp):
                    dx = <int>disps[k, 0]
                    dy = <int>disps[k, 1]
                    s = penalty * ((dx if dx >= 0 else -dx) + (dy if dy >= 0 else -dy))
                    if best >= 0 and s >= best:
                        continue
                    for i in range(-half_window, half_window + 1):
                        yy = _clamp(y + i, H)
                        for j in range(-half_window, half_window + 1):
                            d = A[yy, _clamp(x + j, W)] - B[_clamp(yy + dy, H), _clamp(_clamp(x + j, W) + dx, W)]
                            s += d * d
                        if best >= 0 and s >= best:
                            break
                    if best < 0 or s < best:
                        best = s
                        out[y, x, 0] = dx
                        out[y, x, 1] = dy
                    if best == 0:
                        # nothing can beat an exact match with no penalty
                        break
    return out_arr


def _displacement_order(int radius):
    from vcc._kernels_py import displacement_order

    return np.ascontiguousarray(displacement_order(radius), dtype=np.intp)
