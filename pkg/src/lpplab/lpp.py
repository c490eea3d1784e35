"""Exact last passage solvers and geodesic diagnostics.

The lattice dynamic program sweeps anti-diagonals: within a fixed x+y all
cells are independent, so the sweep vectorizes while staying bit-identical
to the sequential recurrence L(v) = X(v) + max over in-grid predecessors.
Weights are re-derived from the counter-based field on the fly, so the live
state is O(n) for d=1 (two diagonals) and O(n^2) for d=2 (two layers).

Ties are broken by preferring the predecessor with the smaller last
coordinate at every backtrack step; with all-equal weights this yields the
staircase that takes all first-coordinate steps before any second-coordinate
step.  Large-grid geodesic recovery (d=1, n > 2^12) splits on the midpoint
anti-diagonal: the sweep propagates, per cell, the mid-diagonal crossing of
the tie-broken path into that cell, and recurses on the two sub-rectangles.
Whenever the maximizer is unique (almost surely, for continuous weights)
this recovers exactly the full-table backtrack path.
"""

import math
from dataclasses import dataclass

import numpy as np

from .env import WeightField, scale_indices
from .errors import DomainError, SizeError

DP_MAX_N_D1 = 2 ** 15
DP_MAX_N_D2 = 2 ** 8
TABLE_MAX_N_D1 = 2 ** 12
_DC_TILE_CELLS = 1 << 20
_MATERIALIZE_CELLS = 1 << 22

RESIDUAL_SCALE = -1  # bucket key for weights at or below the lowest scale floor


@dataclass
class PassageResult:
    """Last passage value with optional geodesic diagnostics."""

    value: float
    geodesic: np.ndarray | None = None
    scale_sums: dict | None = None
    transversal: int | None = None


def ltr_sum(values):
    """Strict left-to-right accumulation; matches the DP's own arithmetic."""
    total = 0.0
    for v in values:
        total += float(v)
    return total


def check_directed_path(vertices, shape):
    """Validate the up-right path invariants for the given grid shape."""
    v = np.asarray(vertices)
    if v.ndim != 2 or v.shape[1] != len(shape):
        return False
    if tuple(v[0]) != (0,) * len(shape):
        return False
    if tuple(v[-1]) != tuple(s - 1 for s in shape):
        return False
    steps = np.diff(v, axis=0)
    return bool(np.all(steps >= 0) and np.all(steps.sum(axis=1) == 1))


def staircase(u, v):
    """Directed completion from u to v taking all first-coordinate steps
    first (the completion consistent with the backtrack tie rule)."""
    (ux, uy), (vx, vy) = u, v
    if not (ux <= vx and uy <= vy):
        raise DomainError("staircase endpoints must be ordered")
    xs = np.concatenate([np.arange(ux, vx + 1), np.full(vy - uy, vx)])
    ys = np.concatenate([np.full(vx - ux + 1, uy), np.arange(uy + 1, vy + 1)])
    return np.column_stack([xs, ys]).astype(np.int64)


# -- d = 1 sweeps ----------------------------------------------------------


def _sweep2(wfn, x0, y0, x1, y1, tmid=None, table=None):
    """Anti-diagonal DP over the rectangle [x0..x1] x [y0..y1].

    Returns (value, cross) where cross is the absolute vertex at which the
    tie-broken geodesic meets local diagonal tmid (None when not tracked).
    If table is supplied it is filled with the DP values.
    """
    W = x1 - x0 + 1
    H = y1 - y0 + 1
    T = W + H - 2
    xs_full = np.arange(W, dtype=np.int64)
    prev = prev_lo = None
    cross_prev = None
    for t in range(T + 1):
        lo = max(0, t - (H - 1))
        hi = min(t, W - 1)
        m = hi - lo + 1
        xs = xs_full[lo:hi + 1]
        w = wfn(x0 + xs, y0 + (t - xs))
        if t == 0:
            cur = np.atleast_1d(np.asarray(w, dtype=np.float64)).copy()
        else:
            off = lo - prev_lo
            pad = np.empty(prev.shape[0] + 2)
            pad[0] = pad[-1] = -np.inf
            pad[1:-1] = prev
            hp = pad[1 + off: 1 + off + m]   # predecessor (x, y-1)
            vp = pad[off: off + m]           # predecessor (x-1, y)
            cur = w + np.maximum(hp, vp)
            if tmid is not None and t > tmid:
                cpad = np.empty(cross_prev.shape[0] + 2, dtype=np.int64)
                cpad[0] = cpad[-1] = -1
                cpad[1:-1] = cross_prev
                cross_prev = np.where(hp >= vp,
                                      cpad[1 + off: 1 + off + m],
                                      cpad[off: off + m])
        if tmid is not None and t == tmid:
            cross_prev = xs.copy()
        if table is not None:
            table[xs, t - xs] = cur
        prev, prev_lo = cur, lo
    value = float(prev[0])
    cross = None
    if tmid is not None:
        cx = int(cross_prev[0])
        cross = (x0 + cx, y0 + (tmid - cx))
    return value, cross


def _backtrack2(table, x0, y0):
    W, H = table.shape
    ix, iy = W - 1, H - 1
    rev = [(ix, iy)]
    while (ix, iy) != (0, 0):
        if iy > 0 and (ix == 0 or table[ix, iy - 1] >= table[ix - 1, iy]):
            iy -= 1
        else:
            ix -= 1
        rev.append((ix, iy))
    rev.reverse()
    out = np.asarray(rev, dtype=np.int64)
    out[:, 0] += x0
    out[:, 1] += y0
    return out


def _geodesic_table2(wfn, x0, y0, x1, y1):
    W, H = x1 - x0 + 1, y1 - y0 + 1
    table = np.empty((W, H))
    _sweep2(wfn, x0, y0, x1, y1, table=table)
    return _backtrack2(table, x0, y0)


def _geodesic_dc2(wfn, x0, y0, x1, y1):
    W, H = x1 - x0 + 1, y1 - y0 + 1
    if W * H <= _DC_TILE_CELLS or W == 1 or H == 1:
        return _geodesic_table2(wfn, x0, y0, x1, y1)
    tmid = (W + H - 2) // 2
    _, cross = _sweep2(wfn, x0, y0, x1, y1, tmid=tmid)
    cx, cy = cross
    left = _geodesic_dc2(wfn, x0, y0, cx, cy)
    right = _geodesic_dc2(wfn, cx, cy, x1, y1)
    return np.concatenate([left, right[1:]])


# -- d = 2 sweep -----------------------------------------------------------


def _sweep3(wfn, shape, table=None):
    """Layer-by-layer DP on a 3-d grid; each layer is an anti-diagonal
    sweep with the fully-known layer below as a third predecessor."""
    A, B, C = shape
    xs_full = np.arange(A, dtype=np.int64)
    below = None
    for z in range(C):
        layer = np.empty((A, B))
        prev = prev_lo = None
        for t in range(A + B - 1):
            lo = max(0, t - (B - 1))
            hi = min(t, A - 1)
            m = hi - lo + 1
            xs = xs_full[lo:hi + 1]
            ys = t - xs
            w = np.atleast_1d(np.asarray(wfn(xs, ys, np.full(m, z, dtype=np.int64)),
                                         dtype=np.float64))
            if t == 0:
                cand = np.full(m, -np.inf)
            else:
                off = lo - prev_lo
                pad = np.empty(prev.shape[0] + 2)
                pad[0] = pad[-1] = -np.inf
                pad[1:-1] = prev
                cand = np.maximum(pad[1 + off: 1 + off + m], pad[off: off + m])
            if below is not None:
                cand = np.maximum(cand, below[xs, ys])
            if t == 0 and below is None:
                cur = w.copy()
            else:
                cur = w + cand
            layer[xs, ys] = cur
            prev, prev_lo = cur, lo
        if table is not None:
            table[:, :, z] = layer
        below = layer
    return float(below[A - 1, B - 1])


def _backtrack3(table):
    A, B, C = table.shape
    ix, iy, iz = A - 1, B - 1, C - 1
    rev = [(ix, iy, iz)]
    while (ix, iy, iz) != (0, 0, 0):
        best = -np.inf
        step = None
        # tie preference: decrement the last coordinate first
        for dx, dy, dz in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
            px, py, pz = ix - dx, iy - dy, iz - dz
            if px >= 0 and py >= 0 and pz >= 0:
                val = table[px, py, pz]
                if val > best:
                    best = val
                    step = (px, py, pz)
        ix, iy, iz = step
        rev.append(step)
    rev.reverse()
    return np.asarray(rev, dtype=np.int64)


# -- public operations ------------------------------------------------------


def _guard(field: WeightField):
    n, d = field.spec.n, field.spec.d
    if d == 1:
        if n > DP_MAX_N_D1:
            raise SizeError(f"d=1 DP supports n <= {DP_MAX_N_D1}, got {n}")
    elif d == 2:
        if n > DP_MAX_N_D2:
            raise SizeError(f"d=2 DP supports n <= {DP_MAX_N_D2}, got {n}")
    else:
        raise DomainError("lattice DP supports d in {1, 2}")


def _maybe_materialize(field: WeightField):
    if field.spec.kind == "brw" and int(np.prod(field.shape)) <= _MATERIALIZE_CELLS:
        field.materialize(_MATERIALIZE_CELLS)


def path_weights(field: WeightField, path):
    path = np.asarray(path)
    return field.weights(*(path[:, i] for i in range(path.shape[1])))


def last_passage(field: WeightField) -> float:
    """Maximum directed-path weight between the grid's corner vertices."""
    _guard(field)
    _maybe_materialize(field)
    if field.spec.d == 1:
        (sx, sy) = field.shape
        value, _ = _sweep2(field.weights, 0, 0, sx - 1, sy - 1)
        return value
    return _sweep3(field.weights, field.shape)


def geodesic(field: WeightField) -> PassageResult:
    """A maximizing path under the deterministic tie rule, with per-scale
    sums and (d=1) the transversal fluctuation."""
    _guard(field)
    _maybe_materialize(field)
    if field.spec.d == 1:
        sx, sy = field.shape
        if field.spec.n <= TABLE_MAX_N_D1:
            path = _geodesic_table2(field.weights, 0, 0, sx - 1, sy - 1)
        else:
            path = _geodesic_dc2(field.weights, 0, 0, sx - 1, sy - 1)
        transversal = transversal_fluctuation(path)
    else:
        table = np.empty(field.shape)
        _sweep3(field.weights, field.shape, table=table)
        path = _backtrack3(table)
        transversal = None
    value = ltr_sum(path_weights(field, path))
    sums = scale_decomposition(path, field)
    return PassageResult(value=value, geodesic=path, scale_sums=sums,
                         transversal=transversal)


def passage_between(field: WeightField, u, v) -> float:
    """Restricted last passage time L(u; v) over the sub-rectangle."""
    u = tuple(int(c) for c in u)
    v = tuple(int(c) for c in v)
    for p in (u, v):
        if len(p) != len(field.shape) or any(
                not (0 <= c < s) for c, s in zip(p, field.shape)):
            raise DomainError(f"point {p} outside grid {field.shape}")
    if any(a > b for a, b in zip(u, v)):
        raise DomainError(f"endpoints must be ordered, got {u} and {v}")
    _guard(field)
    _maybe_materialize(field)
    if field.spec.d == 1:
        value, _ = _sweep2(field.weights, u[0], u[1], v[0], v[1])
        return value
    shape = tuple(b - a + 1 for a, b in zip(u, v))
    return _sweep3(lambda x, y, z: field.weights(x + u[0], y + u[1], z + u[2]),
                   shape)


def scale_decomposition(path, field: WeightField, n=None, k_max=None):
    """Bucket the path's weights by dyadic scale.

    Returns {k: sum} for occupied scales plus RESIDUAL_SCALE (-1) for
    weights at or below n/2^k_max (including non-positive weights).  The
    buckets partition the path's vertices, so they sum to the path weight
    up to summation reordering.
    """
    if n is None:
        n = field.spec.n
    if k_max is None:
        k_max = max(0, math.ceil(math.log2(n))) if n > 1 else 0
    w = np.asarray(path_weights(field, path), dtype=np.float64)
    idx = scale_indices(w, n, k_max)
    sums = {RESIDUAL_SCALE: 0.0}
    for k in np.unique(idx):
        sums[int(k)] = float(w[idx == k].sum())
    return sums


def skeleton(path, field: WeightField, threshold):
    """Subsequence of path vertices with weight above the threshold; the
    path endpoints are always kept so the rendered skeleton spans corner
    to corner."""
    path = np.asarray(path)
    keep = np.asarray(path_weights(field, path)) > threshold
    keep[0] = keep[-1] = True
    return path[keep]


def transversal_fluctuation(path) -> int:
    """Maximum deviation |x - y| of a d=1 path from the diagonal."""
    path = np.asarray(path)
    if path.ndim != 2 or path.shape[1] != 2:
        raise DomainError("transversal fluctuation is defined for d=1 paths")
    return int(np.abs(path[:, 0] - path[:, 1]).max())


# -- continuum chains -------------------------------------------------------


def poisson_last_passage(layers) -> float:
    """Maximum total weight of a strictly increasing chain through the
    layered point cloud, from (0,0) to (n,n).

    Sorts on the first coordinate and runs a prefix-max Fenwick tree over
    rank-compressed second coordinates (O(N log N)).  Points sharing a
    coordinate are never chained together (strict increase), and points on
    the box boundary cannot be chained to the corners.
    """
    if layers.total_points > 10 ** 7:
        raise SizeError("point cloud exceeds the 1e7 chain-solver guard")
    n = layers.n
    xs, ys, ws = [], [], []
    for layer in layers.layers:
        pts = layer.points
        if len(pts):
            xs.append(pts[:, 0])
            ys.append(pts[:, 1])
            ws.append(np.full(len(pts), layer.weight))
    if not xs:
        return 0.0
    xs = np.concatenate(xs)
    ys = np.concatenate(ys)
    ws = np.concatenate(ws)
    inside = (xs > 0) & (xs < n) & (ys > 0) & (ys < n)
    xs, ys, ws = xs[inside], ys[inside], ws[inside]
    if xs.size == 0:
        return 0.0

    order = np.lexsort((ys, xs))
    xs, ys, ws = xs[order], ys[order], ws[order]
    uniq = np.unique(ys)
    rank = np.searchsorted(uniq, ys)  # 0-based; strictly smaller y <=> smaller rank
    size = len(uniq)
    tree = [0.0] * (size + 1)

    def query(k):  # max chain value over ranks < k
        best = 0.0
        while k:
            if tree[k] > best:
                best = tree[k]
            k -= k & -k
        return best

    def update(k, val):
        while k <= size:
            if tree[k] < val:
                tree[k] = val
            k += k & -k

    answer = 0.0
    i = 0
    N = xs.size
    while i < N:
        j = i
        while j < N and xs[j] == xs[i]:
            j += 1
        vals = [ws[t] + query(rank[t]) for t in range(i, j)]
        for t, val in zip(range(i, j), vals):
            update(rank[t] + 1, val)
            if val > answer:
                answer = val
        i = j
    return float(answer)
