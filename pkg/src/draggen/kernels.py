"""Hot per-pixel kernels: numba builds with pure-numpy fallbacks.

The active path is chosen by :mod:`draggen.backend` at import time
(``DRAGGEN_DISABLE_NUMBA=1`` forces numpy). Both variants are exported so
tests and the benchmark can compare them directly.
"""

import numpy as np

from draggen import backend
from draggen.backend import njit


# ---------------------------------------------------------------------------
# Convex-quad rasterization (painter's order)
# ---------------------------------------------------------------------------

def _orient_quads(quads: np.ndarray) -> np.ndarray:
    """Return quads with counter-clockwise winding in (row, col) coords."""
    q = np.asarray(quads, dtype=np.float64)
    e1 = q[:, 1] - q[:, 0]
    e2 = q[:, 2] - q[:, 0]
    area2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    out = q.copy()
    flip = area2 < 0
    out[flip] = out[flip, ::-1]
    return out


@njit(cache=True)
def _fill_quads_jit(quads, ids, index_map):  # pragma: no cover - jit body
    h, w = index_map.shape
    n = quads.shape[0]
    for q in range(n):
        rmin = quads[q, 0, 0]
        rmax = quads[q, 0, 0]
        cmin = quads[q, 0, 1]
        cmax = quads[q, 0, 1]
        for k in range(1, 4):
            if quads[q, k, 0] < rmin:
                rmin = quads[q, k, 0]
            if quads[q, k, 0] > rmax:
                rmax = quads[q, k, 0]
            if quads[q, k, 1] < cmin:
                cmin = quads[q, k, 1]
            if quads[q, k, 1] > cmax:
                cmax = quads[q, k, 1]
        r0 = max(0, int(np.floor(rmin - 0.5)))
        r1 = min(h - 1, int(np.ceil(rmax)))
        c0 = max(0, int(np.floor(cmin - 0.5)))
        c1 = min(w - 1, int(np.ceil(cmax)))
        for r in range(r0, r1 + 1):
            pr = r + 0.5
            for c in range(c0, c1 + 1):
                pc = c + 0.5
                inside = True
                for k in range(4):
                    ar = quads[q, k, 0]
                    ac = quads[q, k, 1]
                    br = quads[q, (k + 1) % 4, 0]
                    bc = quads[q, (k + 1) % 4, 1]
                    cross = (br - ar) * (pc - ac) - (bc - ac) * (pr - ar)
                    if cross < 0.0:
                        inside = False
                        break
                if inside:
                    index_map[r, c] = ids[q]


def _fill_quads_numpy(quads, ids, index_map):
    h, w = index_map.shape
    for q in range(quads.shape[0]):
        rmin, cmin = quads[q].min(axis=0)
        rmax, cmax = quads[q].max(axis=0)
        r0 = max(0, int(np.floor(rmin - 0.5)))
        r1 = min(h - 1, int(np.ceil(rmax)))
        c0 = max(0, int(np.floor(cmin - 0.5)))
        c1 = min(w - 1, int(np.ceil(cmax)))
        if r1 < r0 or c1 < c0:
            continue
        rr, cc = np.meshgrid(
            np.arange(r0, r1 + 1) + 0.5, np.arange(c0, c1 + 1) + 0.5, indexing="ij"
        )
        inside = np.ones(rr.shape, dtype=bool)
        for k in range(4):
            ar, ac = quads[q, k]
            br, bc = quads[q, (k + 1) % 4]
            cross = (br - ar) * (cc - ac) - (bc - ac) * (rr - ar)
            inside &= cross >= 0.0
        sub = index_map[r0 : r1 + 1, c0 : c1 + 1]
        sub[inside] = ids[q]


def fill_quads(quads: np.ndarray, ids: np.ndarray, height: int, width: int) -> np.ndarray:
    """Rasterize convex quads into an index map, later quads painting over earlier.

    quads: (n, 4, 2) corner coordinates in (row, col) pixel space, any winding.
    ids: (n,) int32 values written where a quad covers a pixel center.
    Returns an int32 (height, width) map initialized to -1 (background).
    """
    index_map = np.full((height, width), -1, dtype=np.int32)
    if len(quads) == 0:
        return index_map
    q = np.ascontiguousarray(_orient_quads(quads))
    ids = np.ascontiguousarray(np.asarray(ids, dtype=np.int32))
    if backend.NUMBA_ENABLED:
        _fill_quads_jit(q, ids, index_map)
    else:
        _fill_quads_numpy(q, ids, index_map)
    return index_map


# ---------------------------------------------------------------------------
# K-means assignment step
# ---------------------------------------------------------------------------

@njit(cache=True)
def _assign_clusters_jit(x, centers, labels, dists):  # pragma: no cover - jit body
    n, d = x.shape
    k = centers.shape[0]
    for i in range(n):
        best = 0.0
        best_k = 0
        for j in range(d):
            diff = x[i, j] - centers[0, j]
            best += diff * diff
        for m in range(1, k):
            acc = 0.0
            for j in range(d):
                diff = x[i, j] - centers[m, j]
                acc += diff * diff
                if acc > best:
                    break
            if acc < best:
                best = acc
                best_k = m
        labels[i] = best_k
        dists[i] = best


def _assign_clusters_numpy(x, centers, labels, dists):
    # chunked to bound the (n, k) distance matrix
    chunk = max(1, int(2_000_000 // max(1, centers.shape[0])))
    for s in range(0, x.shape[0], chunk):
        block = x[s : s + chunk]
        d2 = ((block[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels[s : s + chunk] = np.argmin(d2, axis=1)
        dists[s : s + chunk] = d2[np.arange(block.shape[0]), labels[s : s + chunk]]


def assign_clusters(x: np.ndarray, centers: np.ndarray):
    """Nearest-center assignment; ties resolve to the lowest center index.

    Returns (labels int64 (n,), squared distance to the assigned center (n,)).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    labels = np.zeros(x.shape[0], dtype=np.int64)
    dists = np.zeros(x.shape[0], dtype=np.float64)
    if backend.NUMBA_ENABLED:
        _assign_clusters_jit(x, centers, labels, dists)
    else:
        _assign_clusters_numpy(x, centers, labels, dists)
    return labels, dists
