"""Pure-numpy reference implementations of the hot kernels.

Every function here has a numba twin in ``_kernels_numba``; the two must
produce bit-identical outputs (see tests/test_kernels.py).
"""

import numpy as np

_BIG = np.iinfo(np.int64).max
_EPS = 1e-9


def fill_polygon(xs, ys, width, height):
    """Rasterize a polygon onto a ``(height, width)`` uint8 canvas.

    A pixel is filled iff its center ``(x+0.5, y+0.5)`` is inside the polygon
    (even-odd rule) or lies on one of its edges.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    out = np.zeros((height, width), dtype=np.uint8)
    n = xs.shape[0]
    if n < 3 or width <= 0 or height <= 0:
        return out
    x0 = max(0, int(np.floor(xs.min())) - 1)
    x1 = min(width - 1, int(np.ceil(xs.max())) + 1)
    y0 = max(0, int(np.floor(ys.min())) - 1)
    y1 = min(height - 1, int(np.ceil(ys.max())) + 1)
    if x1 < x0 or y1 < y0:
        return out

    cx = np.arange(x0, x1 + 1, dtype=np.float64)[None, :] + 0.5
    cy = np.arange(y0, y1 + 1, dtype=np.float64)[:, None] + 0.5
    inside = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
    on_edge = np.zeros_like(inside)

    for i in range(n):
        ax, ay = xs[i], ys[i]
        bx, by = xs[(i + 1) % n], ys[(i + 1) % n]
        dx = bx - ax
        dy = by - ay
        len2 = dx * dx + dy * dy
        if len2 > 0.0:
            cross = (cx - ax) * dy - (cy - ay) * dx
            t = ((cx - ax) * dx + (cy - ay) * dy) / len2
            tol = _EPS * max(1.0, np.sqrt(len2))
            on_edge |= (np.abs(cross) <= tol) & (t >= 0.0) & (t <= 1.0)
        else:
            on_edge |= (np.abs(cx - ax) <= _EPS) & (np.abs(cy - ay) <= _EPS)
        if dy != 0.0:
            crosses = (ay > cy) != (by > cy)
            xint = ax + (cy - ay) * dx / dy
            inside ^= crosses & (cx < xint)

    out[y0:y1 + 1, x0:x1 + 1] = (inside | on_edge).astype(np.uint8)
    return out


def confusion_counts(gt, pred, n_cl):
    """Per-pixel confusion matrix: counts[i, j] = #{gt == i and pred == j}."""
    idx = gt.astype(np.int64).ravel() * n_cl + pred.astype(np.int64).ravel()
    counts = np.bincount(idx, minlength=n_cl * n_cl)
    return counts.reshape(n_cl, n_cl).astype(np.int64)


def _shift(a, dy, dx, fill):
    out = np.full_like(a, fill)
    h, w = a.shape
    ys0, ys1 = max(0, dy), min(h, h + dy)
    xs0, xs1 = max(0, dx), min(w, w + dx)
    out[ys0:ys1, xs0:xs1] = a[ys0 - dy:ys1 - dy, xs0 - dx:xs1 - dx]
    return out


def erode(mask, k):
    """Binary erosion with a k-by-k square element; outside pixels count as 0."""
    r = k // 2
    out = mask.astype(np.uint8)
    acc = out
    for d in range(1, r + 1):
        acc = np.minimum(acc, _shift(out, 0, d, 0))
        acc = np.minimum(acc, _shift(out, 0, -d, 0))
    row = acc
    acc = row
    for d in range(1, r + 1):
        acc = np.minimum(acc, _shift(row, d, 0, 0))
        acc = np.minimum(acc, _shift(row, -d, 0, 0))
    return acc


def dilate(mask, k):
    """Binary dilation with a k-by-k square element."""
    r = k // 2
    out = (mask != 0).astype(np.uint8)
    acc = out
    for d in range(1, r + 1):
        acc = np.maximum(acc, _shift(out, 0, d, 0))
        acc = np.maximum(acc, _shift(out, 0, -d, 0))
    row = acc
    acc = row
    for d in range(1, r + 1):
        acc = np.maximum(acc, _shift(row, d, 0, 0))
        acc = np.maximum(acc, _shift(row, -d, 0, 0))
    return acc


_NEIGH = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def label_components(mask):
    """8-connected component labels, int32, background 0.

    Components are numbered 1..n in raster-scan order of their first pixel.
    """
    fg = mask != 0
    h, w = mask.shape
    lab = np.where(fg, np.arange(h * w, dtype=np.int64).reshape(h, w), _BIG)
    while True:
        new = lab.copy()
        for dy, dx in _NEIGH:
            np.minimum(new, _shift(lab, dy, dx, _BIG), out=new)
        new[~fg] = _BIG
        if np.array_equal(new, lab):
            break
        lab = new
    return _canonicalize(lab, fg)


def _canonicalize(lab, fg):
    h, w = lab.shape
    out = np.zeros((h, w), dtype=np.int32)
    vals = lab[fg]
    if vals.size == 0:
        return out
    uniq, first = np.unique(vals, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(uniq.shape[0], dtype=np.int32)
    remap[order] = np.arange(1, uniq.shape[0] + 1, dtype=np.int32)
    out[fg] = remap[np.searchsorted(uniq, vals)]
    return out


def grow_seeds(mask, seeds):
    """Grow seed labels over the foreground by simultaneous 8-connected waves.

    ``seeds`` is int32 with 0 for unassigned; contested pixels at equal wave
    distance go to the lower seed id. Foreground pixels unreachable from any
    seed stay 0.
    """
    fg = mask != 0
    cur = np.where(fg & (seeds > 0), seeds.astype(np.int64), _BIG)
    cur[~fg] = _BIG
    while True:
        neigh = np.full_like(cur, _BIG)
        for dy, dx in _NEIGH:
            np.minimum(neigh, _shift(cur, dy, dx, _BIG), out=neigh)
        new = cur.copy()
        unassigned = fg & (cur == _BIG)
        new[unassigned] = neigh[unassigned]
        if np.array_equal(new, cur):
            break
        cur = new
    cur[cur == _BIG] = 0
    cur[~fg] = 0
    return cur.astype(np.int32)
