"""Compiled inner loops for ray traversal and ray/box intersection.

Each kernel performs the same floating-point operations, in the same order,
as the straightforward array formulation, so results do not depend on
whether a caller goes through these or through plain numpy.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _ray_cells(s, e, span, ts, order_out):
    """Cells crossed by one segment, written to ``order_out``; returns their count."""
    k = 1
    ts[0] = 0.0
    for ax in range(3):
        d = e[ax] - s[ax]
        if d == 0.0:
            continue
        lo = math.floor(min(s[ax], e[ax]))
        for q in range(1, span + 1):
            t = ((lo + q) - s[ax]) / d
            if t > 0.0 and t < 1.0:
                ts[k] = t
                k += 1
    ts[k] = 1.0
    k += 1
    order = np.sort(ts[:k])
    m = 0
    for q in range(k - 1):
        t0 = order[q]
        t1 = order[q + 1]
        if t1 - t0 > 1e-12:
            mid = 0.5 * (t0 + t1)
            for ax in range(3):
                order_out[m, ax] = math.floor(s[ax] + mid * (e[ax] - s[ax]))
            m += 1
    return m


@njit(cache=True)
def traverse_kernel(starts, ends, span):
    n = starts.shape[0]
    cap = n * (3 * span + 1)
    rid = np.empty(cap, np.int64)
    cells = np.empty((cap, 3), np.int64)
    ts = np.empty(3 * span + 2)
    buf = np.empty((3 * span + 1, 3), np.int64)
    m = 0
    for r in range(n):
        c = _ray_cells(starts[r], ends[r], span, ts, buf)
        for q in range(c):
            cells[m] = buf[q]
            rid[m] = r
            m += 1
    return rid[:m], cells[:m]


@njit(cache=True)
def carve_kernel(cells, dims, starts, ends, end_cells, hits, span, persist, orig):
    """Mark traversed cells Free, then hit end cells Occupied; return flat indices that changed.

    ``orig`` is a scratch array of the grid's size filled with 255; it is
    restored before returning.
    """
    n = starts.shape[0]
    ts = np.empty(3 * span + 2)
    buf = np.empty((3 * span + 1, 3), np.int64)
    touched = np.empty(n * (3 * span + 2), np.int64)
    nt = 0
    sy = dims[1] * dims[2]
    sz = dims[2]
    for r in range(n):
        c = _ray_cells(starts[r], ends[r], span, ts, buf)
        for q in range(c + 1):
            if q < c:
                i, j, k = buf[q, 0], buf[q, 1], buf[q, 2]
                if i == end_cells[r, 0] and j == end_cells[r, 1] and k == end_cells[r, 2]:
                    continue
            else:
                if hits[r]:
                    continue
                i, j, k = end_cells[r, 0], end_cells[r, 1], end_cells[r, 2]
            if i < 0 or i >= dims[0] or j < 0 or j >= dims[1] or k < 0 or k >= dims[2]:
                continue
            idx = i * sy + j * sz + k
            if persist and cells[idx] == 2:
                continue
            if orig[idx] == 255:
                orig[idx] = cells[idx]
                touched[nt] = idx
                nt += 1
            cells[idx] = 1
    for r in range(n):
        if not hits[r]:
            continue
        i, j, k = end_cells[r, 0], end_cells[r, 1], end_cells[r, 2]
        if i < 0 or i >= dims[0] or j < 0 or j >= dims[1] or k < 0 or k >= dims[2]:
            continue
        idx = i * sy + j * sz + k
        if orig[idx] == 255:
            orig[idx] = cells[idx]
            touched[nt] = idx
            nt += 1
        cells[idx] = 2
    changed = np.empty(nt, np.int64)
    m = 0
    for q in range(nt):
        idx = touched[q]
        if cells[idx] != orig[idx]:
            changed[m] = idx
            m += 1
        orig[idx] = 255
    return np.sort(changed[:m])


@njit(cache=True)
def ray_boxes_kernel(o, d, lo, hi):
    n = d.shape[0]
    nb = lo.shape[0]
    out = np.full(n, np.inf)
    for r in range(n):
        best = np.inf
        for b in range(nb):
            near = -np.inf
            far = np.inf
            for ax in range(3):
                if d[r, ax] == 0.0:
                    if o[ax] >= lo[b, ax] and o[ax] <= hi[b, ax]:
                        continue
                    near = np.inf
                    far = -np.inf
                    break
                inv = 1.0 / d[r, ax]
                t1 = (lo[b, ax] - o[ax]) * inv
                t2 = (hi[b, ax] - o[ax]) * inv
                near = max(near, min(t1, t2))
                far = min(far, max(t1, t2))
            if near <= far and far >= 0.0:
                t = max(near, 0.0)
                if t < best:
                    best = t
        out[r] = best
    return out
