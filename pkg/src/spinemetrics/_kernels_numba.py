"""Numba-jitted hot kernels.

Bit-identical to the ``_kernels_numpy`` fallbacks; the float arithmetic in
``fill_polygon`` is written with the exact same operation order so both
backends rasterize identically.
"""

import numpy as np
from numba import njit

_BIG = np.iinfo(np.int64).max
_EPS = 1e-9


@njit(cache=True)
def _fill_polygon_impl(xs, ys, width, height):
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

    for py in range(y0, y1 + 1):
        cy = py + 0.5
        for px in range(x0, x1 + 1):
            cx = px + 0.5
            inside = False
            on_edge = False
            for i in range(n):
                ax = xs[i]
                ay = ys[i]
                j = i + 1
                if j == n:
                    j = 0
                bx = xs[j]
                by = ys[j]
                dx = bx - ax
                dy = by - ay
                len2 = dx * dx + dy * dy
                if len2 > 0.0:
                    cross = (cx - ax) * dy - (cy - ay) * dx
                    t = ((cx - ax) * dx + (cy - ay) * dy) / len2
                    tol = _EPS * max(1.0, np.sqrt(len2))
                    if abs(cross) <= tol and 0.0 <= t <= 1.0:
                        on_edge = True
                else:
                    if abs(cx - ax) <= _EPS and abs(cy - ay) <= _EPS:
                        on_edge = True
                if dy != 0.0:
                    if (ay > cy) != (by > cy):
                        xint = ax + (cy - ay) * dx / dy
                        if cx < xint:
                            inside = not inside
            if inside or on_edge:
                out[py, px] = 1
    return out


def fill_polygon(xs, ys, width, height):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    return _fill_polygon_impl(xs, ys, width, height)


@njit(cache=True)
def _confusion_impl(gt, pred, n_cl):
    counts = np.zeros((n_cl, n_cl), dtype=np.int64)
    for i in range(gt.shape[0]):
        counts[gt[i], pred[i]] += 1
    return counts


def confusion_counts(gt, pred, n_cl):
    return _confusion_impl(
        np.ascontiguousarray(gt, dtype=np.int64).ravel(),
        np.ascontiguousarray(pred, dtype=np.int64).ravel(),
        n_cl,
    )


@njit(cache=True)
def _erode_impl(mask, k):
    h, w = mask.shape
    r = k // 2
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            keep = True
            for dy in range(-r, r + 1):
                ny = y + dy
                if ny < 0 or ny >= h:
                    keep = False
                    break
                for dx in range(-r, r + 1):
                    nx = x + dx
                    if nx < 0 or nx >= w or mask[ny, nx] == 0:
                        keep = False
                        break
                if not keep:
                    break
            if keep:
                out[y, x] = 1
    return out


def erode(mask, k):
    return _erode_impl(np.ascontiguousarray(mask != 0, dtype=np.uint8), k)


@njit(cache=True)
def _dilate_impl(mask, k):
    h, w = mask.shape
    r = k // 2
    out = np.zeros((h, w), dtype=np.uint8)
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            for dy in range(-r, r + 1):
                ny = y + dy
                if ny < 0 or ny >= h:
                    continue
                for dx in range(-r, r + 1):
                    nx = x + dx
                    if 0 <= nx < w:
                        out[ny, nx] = 1
    return out


def dilate(mask, k):
    return _dilate_impl(np.ascontiguousarray(mask != 0, dtype=np.uint8), k)


@njit(cache=True)
def _label_impl(mask):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    next_label = 0
    for sy in range(h):
        for sx in range(w):
            if mask[sy, sx] == 0 or out[sy, sx] != 0:
                continue
            next_label += 1
            top = 0
            stack[top] = sy * w + sx
            top += 1
            out[sy, sx] = next_label
            while top > 0:
                top -= 1
                pos = stack[top]
                y = pos // w
                x = pos % w
                for dy in range(-1, 2):
                    ny = y + dy
                    if ny < 0 or ny >= h:
                        continue
                    for dx in range(-1, 2):
                        nx = x + dx
                        if nx < 0 or nx >= w:
                            continue
                        if mask[ny, nx] != 0 and out[ny, nx] == 0:
                            out[ny, nx] = next_label
                            stack[top] = ny * w + nx
                            top += 1
    return out


def label_components(mask):
    return _label_impl(np.ascontiguousarray(mask != 0, dtype=np.uint8))


@njit(cache=True)
def _grow_impl(mask, seeds):
    h, w = mask.shape
    cur = np.full((h, w), _BIG, dtype=np.int64)
    for y in range(h):
        for x in range(w):
            if mask[y, x] != 0 and seeds[y, x] > 0:
                cur[y, x] = seeds[y, x]
    nxt = cur.copy()
    changed = True
    while changed:
        changed = False
        for y in range(h):
            for x in range(w):
                if mask[y, x] == 0 or cur[y, x] != _BIG:
                    continue
                best = _BIG
                for dy in range(-1, 2):
                    ny = y + dy
                    if ny < 0 or ny >= h:
                        continue
                    for dx in range(-1, 2):
                        nx = x + dx
                        if nx < 0 or nx >= w or (dy == 0 and dx == 0):
                            continue
                        if cur[ny, nx] < best:
                            best = cur[ny, nx]
                if best != _BIG:
                    nxt[y, x] = best
                    changed = True
        if changed:
            cur[:, :] = nxt[:, :]
    out = np.zeros((h, w), dtype=np.int32)
    for y in range(h):
        for x in range(w):
            if mask[y, x] != 0 and cur[y, x] != _BIG:
                out[y, x] = cur[y, x]
    return out


def grow_seeds(mask, seeds):
    return _grow_impl(
        np.ascontiguousarray(mask != 0, dtype=np.uint8),
        np.ascontiguousarray(seeds, dtype=np.int32),
    )
