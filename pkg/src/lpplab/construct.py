"""Constructive lower-bound path builders.

Two algorithms, both producing a valid directed path plus per-level
diagnostics:

* the multi-scale cylinder construction for critical heavy-tailed i.i.d.
  fields: level by level, each rectangle demarcated by previously selected
  vertices has its diagonal covered by m similar sub-rectangles, and every
  odd-indexed sub-rectangle's diagonal cylinder is scanned for a lattice
  vertex of the next dyadic scale (the lexicographically smallest hit is
  kept);

* the up/down-skeleton recursion for the hierarchical Gaussian field: in
  every slope-1 square, the two reflected staircase trajectories compete
  through the sum of next-scale box variables weighted by exact step
  counts, the larger is kept, and the construction recurses in the
  traversed off-diagonal boxes.

Geometry internal to the heavy construction is exact: sub-rectangle corners
are rationals (equal subdivision of integer-corner diagonals), and the
cylinder parameter is the rational value of the float rho/lambda^2, so the
a-priori area and slope certificates hold deterministically rather than up
to rounding.
"""

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .env import WeightField, scale_of
from .errors import DegenerateError, DomainError, InfeasibleError, InternalError
from .geometry import Rect
from .lpp import ltr_sum, path_weights, staircase

DESK_S = 2
DESK_M = 4
BENCHMARK_HIT_FRACTION = 0.125
_SCAN_CHUNK = 1 << 19


@dataclass(frozen=True)
class MultiScaleParams:
    """Separation s, level count M, and the cylinder parameters lambda, rho."""

    s: int
    M: int
    lam: float
    rho: float
    source: str  # "paper-asymptotic" | "desk-override"

    @property
    def degenerate(self):
        return self.M < 1

    @property
    def cylinder_r(self):
        return self.rho / self.lam ** 2


def heavy_params(n, s=None, M=None, lam=None, rho=None) -> MultiScaleParams:
    """Construction parameters for grid size n.

    Without overrides, uses the asymptotic choices s = round(100*log2 log2 n),
    M = floor(log2 n / (10 s)), lambda = (log2 n)^(1/4), rho =
    (log2 log2 n)^(1/2); at any desk-scale n these give M = 0, flagged via
    .degenerate.  Overriding (s, M) is allowed as long as M*s <= log2 n - 2,
    so the finest scale keeps a nonempty weight bucket.
    """
    if n < 4:
        raise DomainError("heavy_params requires n >= 4")
    log_n = math.log2(n)
    loglog_n = math.log2(log_n)
    lam = float(lam) if lam is not None else log_n ** 0.25
    rho = float(rho) if rho is not None else math.sqrt(loglog_n)
    if s is None and M is None:
        s_val = round(100.0 * loglog_n)
        return MultiScaleParams(s=s_val, M=int(log_n // (10 * s_val)),
                                lam=lam, rho=rho, source="paper-asymptotic")
    if s is None or M is None:
        raise DomainError("override requires both s and M")
    s, M = int(s), int(M)
    if s < 1 or M < 1:
        raise DomainError("override requires s >= 1 and M >= 1")
    if M * s > log_n - 2:
        raise InfeasibleError(
            f"M*s = {M * s} exceeds log2(n) - 2 = {log_n - 2:g}: "
            "scales would exceed the weight range")
    return MultiScaleParams(s=s, M=M, lam=lam, rho=rho, source="desk-override")


@dataclass
class LevelSets:
    """Vertex sets, demarcated rectangles, and scan diagnostics per level.

    levels[l] is the ordered vertex array of level l (corners included),
    rects[l] the integer-corner rectangles between consecutive vertices,
    counts[l] the per-rectangle sub-rectangle counts used to build level
    l+1, and scanned[l]/hits[l] the cylinder scan tallies of that step.
    """

    n: int
    params: MultiScaleParams
    levels: list
    rects: list
    counts: list
    scanned: list
    hits: list


def _consecutive_rects(vertices):
    out = []
    for (ax, ay), (bx, by) in zip(vertices[:-1], vertices[1:]):
        if not (ax < bx and ay < by):
            raise InternalError("level vertices are not strictly ordered")
        out.append(((ax, ay), (bx, by)))
    return out


def _floor_sqrt(frac: Fraction) -> int:
    return math.isqrt(frac.numerator * frac.denominator) // frac.denominator


def _scan_cylinder(field, ax, ay, bx, by, r, lo_thr, hi_thr):
    """Lexicographically smallest lattice vertex in the diagonal cylinder of
    the rational-corner rectangle whose weight lies in (lo_thr, hi_thr].

    Scans columns left to right, rows bottom to top, evaluating weights in
    chunks and stopping at the first hit, so the result never depends on
    chunking.  Returns None when the cylinder holds no such vertex.
    """
    slope_f = Fraction(by - ay) / Fraction(bx - ax)
    half = r * (by - ay)
    x_lo, x_hi = math.ceil(ax), math.floor(bx)
    y_rect_lo, y_rect_hi = math.ceil(ay), math.floor(by)

    pend_x, pend_y = [], []
    pend_size = 0

    def flush():
        nonlocal pend_x, pend_y, pend_size
        xs = np.concatenate(pend_x)
        ys = np.concatenate(pend_y)
        pend_x, pend_y, pend_size = [], [], 0
        w = field.weights(xs, ys)
        hit = (w > lo_thr) & (w <= hi_thr)
        if hit.any():
            i = int(np.argmax(hit))
            return int(xs[i]), int(ys[i])
        return None

    yc = ay + slope_f * (x_lo - ax)
    for x in range(x_lo, x_hi + 1):
        y_lo = max(math.ceil(yc - half), y_rect_lo)
        y_hi = min(math.floor(yc + half), y_rect_hi)
        yc += slope_f
        if y_lo <= y_hi:
            cnt = y_hi - y_lo + 1
            pend_x.append(np.full(cnt, x, dtype=np.int64))
            pend_y.append(np.arange(y_lo, y_hi + 1, dtype=np.int64))
            pend_size += cnt
            if pend_size >= _SCAN_CHUNK:
                found = flush()
                if found is not None:
                    return found
    if pend_size:
        return flush()
    return None


def build_heavy_path(field: WeightField, params: MultiScaleParams):
    """Run the multi-scale construction; returns (path, LevelSets).

    Raises DegenerateError if at some level every rectangle is too small to
    carry even one sub-rectangle (the desk-scale feasibility signal).
    """
    spec = field.spec
    if spec.d != 1:
        raise DomainError("the multi-scale construction is d=1 only")
    if spec.kind not in ("iid-pareto2", "iid-logcorrected"):
        raise DomainError("the multi-scale construction expects an i.i.d. field")
    n = spec.n
    lam_f = Fraction(params.lam)
    rho_f = Fraction(params.rho)
    r_f = rho_f / lam_f ** 2
    if not (0 < r_f < 1):
        raise InfeasibleError("cylinder width fraction rho/lambda^2 must lie in (0,1)")

    vertices = [(0, 0), (n, n)]
    levels = [np.asarray(vertices, dtype=np.int64)]
    rects_all = [_consecutive_rects(vertices)]
    counts, scanned, hits = [], [], []

    for lvl in range(params.M):
        k = (lvl + 1) * params.s
        lo_thr = np.ldexp(float(n), -k)
        hi_thr = np.ldexp(float(n), -(k - 1))
        m_list = []
        new_pts = []
        n_scanned = n_hits = 0
        for (a, b) in rects_all[-1]:
            dx, dy = b[0] - a[0], b[1] - a[1]
            area = dx * dy
            v2 = Fraction(4) ** k * area / (lam_f ** 2 * n ** 2)
            m = _floor_sqrt(v2)
            m_list.append(m)
            for j in range(1, m // 2):
                # sub-rectangle 2j+1 of the equal diagonal subdivision
                q = 2 * j
                sub_a = (a[0] + Fraction(q, m) * dx, a[1] + Fraction(q, m) * dy)
                sub_b = (a[0] + Fraction(q + 1, m) * dx, a[1] + Fraction(q + 1, m) * dy)
                n_scanned += 1
                found = _scan_cylinder(field, sub_a[0], sub_a[1], sub_b[0], sub_b[1],
                                       r_f, lo_thr, hi_thr)
                if found is not None:
                    n_hits += 1
                    new_pts.append(found)
        if all(m == 0 for m in m_list):
            raise DegenerateError(
                f"no rectangle admits a sub-rectangle cover at level {lvl + 1}")
        counts.append(m_list)
        scanned.append(n_scanned)
        hits.append(n_hits)
        vertices = sorted(set(vertices) | set(new_pts))
        levels.append(np.asarray(vertices, dtype=np.int64))
        rects_all.append(_consecutive_rects(vertices))

    segs = [staircase(u, v) for u, v in zip(vertices[:-1], vertices[1:])]
    path = np.concatenate([segs[0]] + [s[1:] for s in segs[1:]])
    return path, LevelSets(n=n, params=params, levels=levels, rects=rects_all,
                           counts=counts, scanned=scanned, hits=hits)


@dataclass
class AprioriReport:
    """Per-rectangle certificates: area lower bound, iterated slope bound,
    and slope ratio relative to the parent rectangle."""

    area_ok: list
    slope_ok: list
    parent_ok: list

    @property
    def all_ok(self):
        return all(all(l) for l in self.area_ok + self.slope_ok + self.parent_ok)


def verify_apriori(levels: LevelSets, params: MultiScaleParams) -> AprioriReport:
    """Check the construction's deterministic a-priori estimates exactly.

    Every level-l rectangle must have area at least lambda^2 n^2 / 2^(2ls)
    and slope within (1 + 2 rho/lambda^2)^(+-1) of its parent, hence within
    the iterated bound of slope 1.  All comparisons are exact rational
    arithmetic; any False entry is an implementation bug, not randomness.
    """
    n = levels.n
    lam_f = Fraction(params.lam)
    r_f = Fraction(params.rho) / lam_f ** 2
    factor = 1 + 2 * r_f
    area_ok, slope_ok, parent_ok = [], [], []
    for lvl in range(1, len(levels.rects)):
        bound = lam_f ** 2 * n ** 2 / Fraction(4) ** (lvl * params.s)
        arr_a, arr_s, arr_p = [], [], []
        parents = levels.rects[lvl - 1]
        parent_ax = [p[0][0] for p in parents]
        for (a, b) in levels.rects[lvl]:
            area = (b[0] - a[0]) * (b[1] - a[1])
            arr_a.append(area >= bound)
            s = Fraction(b[1] - a[1], b[0] - a[0])
            arr_s.append(factor ** (-lvl) <= s <= factor ** lvl)
            # parent: the unique coarser rectangle containing this one
            pi = bisect.bisect_right(parent_ax, a[0]) - 1
            pa, pb = parents[pi]
            ps = Fraction(pb[1] - pa[1], pb[0] - pa[0])
            arr_p.append(1 / factor <= s / ps <= factor)
        area_ok.append(arr_a)
        slope_ok.append(arr_s)
        parent_ok.append(arr_p)
    return AprioriReport(area_ok=area_ok, slope_ok=slope_ok, parent_ok=parent_ok)


def cylinder_hit_stats(field: WeightField, params: MultiScaleParams):
    """Fraction of scanned cylinders containing a vertex of the required
    scale, per level (None where no cylinder was scanned).  Compare against
    BENCHMARK_HIT_FRACTION."""
    _, levels = build_heavy_path(field, params)
    return {lvl + 1: (levels.hits[lvl] / levels.scanned[lvl]
                      if levels.scanned[lvl] else None)
            for lvl in range(params.M)}


def scale_purity(levels: LevelSets, field: WeightField) -> bool:
    """Every vertex added at level l must have scale l*s; recount from the
    field, independently of the scan bookkeeping."""
    s = levels.params.s
    for lvl in range(1, len(levels.levels)):
        prev = {tuple(v) for v in levels.levels[lvl - 1]}
        for v in levels.levels[lvl]:
            tv = tuple(v)
            if tv in prev:
                continue
            if scale_of(field.at(tv), levels.n) != lvl * s:
                return False
    return True


# -- hierarchical Gaussian field construction -------------------------------


@dataclass(frozen=True)
class SkeletonChoice:
    """Outcome of one up-vs-down competition inside a slope-1 square."""

    level: int
    square: Rect
    choice: str
    gain: float
    alternative_gain: float


def build_brw_path(field: WeightField, s: int):
    """Recursive up/down-skeleton construction on the hierarchical field.

    In every slope-1 square of side n/2^(ls) the competing sums are the
    scale-(l+1)s box variables weighted by exact step counts: 2h-1 per
    off-diagonal box and h per corner box, h = n/2^((l+1)s).  The larger
    sum wins (up preferred on exact ties) and the construction recurses in
    the 2^s - 1 traversed off-diagonal boxes; corner boxes contribute
    identically to both choices and stay out of the comparison.  Returns
    (path, choices, L1, L2) where L1 sums the path's box-weighted variables
    over the sampled scales s, 2s, ..., Ms and L2 over all other scales, so
    L1 + L2 equals the path weight.
    """
    spec = field.spec
    if spec.kind != "brw" or spec.d != 1:
        raise DomainError("build_brw_path expects a d=1 brw field")
    n = spec.n
    m = n.bit_length() - 1
    if s < 1:
        raise DomainError("s must be >= 1")
    if s > m:
        raise DegenerateError(f"separation s={s} exceeds log2(n)={m}")
    M = m // s

    choices = []
    verts = []

    def traverse(x0, y0, side, lvl):
        if lvl == M:
            for v in staircase((x0, y0), (x0 + side - 1, y0 + side - 1)):
                verts.append((int(v[0]), int(v[1])))
            return
        h = side >> s
        k = (lvl + 1) * s
        shift = m - k
        bx0, by0 = x0 >> shift, y0 >> shift
        js = np.arange(1, (1 << s), dtype=np.int64)
        z_up = float((2 * h - 1) * field.brw_xi(k, bx0 + js - 1, by0 + js).sum())
        z_dn = float((2 * h - 1) * field.brw_xi(k, bx0 + js, by0 + js - 1).sum())
        up = z_up >= z_dn
        choices.append(SkeletonChoice(
            level=lvl, square=Rect((x0, y0), (x0 + side, y0 + side)),
            choice="up" if up else "down",
            gain=max(z_up, z_dn), alternative_gain=min(z_up, z_dn)))
        if up:
            verts.extend((x0, y0 + t) for t in range(h))
            for j in range(1, 1 << s):
                if j > 1:  # single transition vertex between consecutive boxes
                    verts.append((x0 + (j - 1) * h, y0 + j * h - 1))
                traverse(x0 + (j - 1) * h, y0 + j * h, h, lvl + 1)
            verts.extend((x0 + ((1 << s) - 1) * h + t, y0 + side - 1) for t in range(h))
        else:
            verts.extend((x0 + t, y0) for t in range(h))
            for j in range(1, 1 << s):
                if j > 1:
                    verts.append((x0 + j * h, y0 + (j - 1) * h - 1))
                traverse(x0 + j * h, y0 + (j - 1) * h, h, lvl + 1)
            verts.extend((x0 + side - 1, y0 + ((1 << s) - 1) * h + t) for t in range(h))

    traverse(0, 0, n, 0)
    path = np.asarray(verts, dtype=np.int64)

    sampled = {lvl * s for lvl in range(1, M + 1)}
    l1 = l2 = 0.0
    vx, vy = path[:, 0], path[:, 1]
    for k in range(m + 1):
        shift = m - k
        stride = np.int64(1) << np.int64(k)
        bid = (vx >> shift) * stride + (vy >> shift)
        uniq, counts = np.unique(bid, return_counts=True)
        bx, by = uniq // stride, uniq % stride
        contrib = float((counts * field.brw_xi(k, bx, by)).sum())
        if k in sampled:
            l1 += contrib
        else:
            l2 += contrib
    return path, choices, l1, l2


def reference_bound(n, model, beta=None, d=1):
    """The growth shapes of the logarithmic-correction lower bounds, unit
    constant, for plotting and normalization only."""
    if n < 4:
        raise DomainError("reference_bound requires n >= 4")
    log_n = math.log2(n)
    loglog_n = math.log2(log_n)
    if model == "heavy":
        return n * log_n ** ((d + 2) / (2 * (d + 1))) / loglog_n
    if model == "brw":
        return n * math.sqrt(log_n) / loglog_n
    if model == "logcorrected":
        if beta is None:
            raise DomainError("logcorrected reference bound requires beta")
        return n * log_n ** ((d + 2) / (2 * (d + 1)) - beta / (d + 1)) / loglog_n
    raise DomainError(f"unknown reference model {model!r}")
