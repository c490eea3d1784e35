"""Plane-geometry primitives: rectangles, slopes, diagonal cylinders, exact
lattice counting, and the two inequality checkers used as property-test
oracles by the multi-scale construction.

Conventions: a rectangle is given by its bottom-left corner a and top-right
corner b with a strictly below b in both coordinates.  The cylinder
Cyl_r(R) is the set of points of R within vertical deviation r*(height of R)
of the corner-to-corner diagonal, measured in coordinates relative to a
(the absolute-coordinate reading is not translation invariant).
Floating-point comparisons use a 1e-9 relative tolerance.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeError

_RTOL = 1e-9
_LATTICE_EXTENT_GUARD = 10 ** 5


@dataclass(frozen=True)
class Rect:
    """Axis-parallel rectangle with corners a strictly-below b."""

    a: tuple
    b: tuple

    def __post_init__(self):
        if not (self.a[0] < self.b[0] and self.a[1] < self.b[1]):
            raise DomainError(f"rectangle corners must satisfy a < b, got {self.a}, {self.b}")

    @property
    def width(self):
        return self.b[0] - self.a[0]

    @property
    def height(self):
        return self.b[1] - self.a[1]

    @property
    def area(self):
        return self.width * self.height

    @property
    def slope(self):
        return self.height / self.width


@dataclass(frozen=True)
class Cylinder:
    """Diagonal band of width fraction r inside a rectangle."""

    rect: Rect
    r: float

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise DomainError("cylinder width fraction r must lie in (0, 1)")

    @property
    def area(self):
        """Closed form (2 - r) * r * |R|; a hexagon made of a parallelogram
        and two congruent right triangles."""
        return (2.0 - self.r) * self.r * self.rect.area

    def polygon(self):
        """Hexagon vertices, counterclockwise from the bottom-left corner."""
        (ax, ay), r = self.rect.a, self.r
        w, h = self.rect.width, self.rect.height
        return [
            (ax, ay),
            (ax + r * w, ay),
            (ax + w, ay + (1.0 - r) * h),
            (ax + w, ay + h),
            (ax + (1.0 - r) * w, ay + h),
            (ax, ay + r * h),
        ]


def slope(a, b):
    """Slope of the segment from a to b; requires a strictly below b."""
    if not (a[0] < b[0] and a[1] < b[1]):
        raise DomainError(f"slope requires a < b coordinate-wise, got {a}, {b}")
    return (b[1] - a[1]) / (b[0] - a[0])


def cyl_contains(c: Cylinder, p) -> bool:
    """Membership in Cyl_r(R): inside R and within r*height of the diagonal."""
    (ax, ay), (bx, by) = c.rect.a, c.rect.b
    x, y = p
    if not (ax <= x <= bx and ay <= y <= by):
        return False
    h = by - ay
    dev = abs((y - ay) - c.rect.slope * (x - ax))
    return dev <= c.r * h + _RTOL * h


def _column_membership(c: Cylinder, xs, ys):
    # vectorized cyl_contains for integer candidates (same comparisons)
    (ax, ay), (bx, by) = c.rect.a, c.rect.b
    h = by - ay
    dev = np.abs((ys - ay) - c.rect.slope * (xs - ax))
    return (xs >= ax) & (xs <= bx) & (ys >= ay) & (ys <= by) & (dev <= c.r * h + _RTOL * h)


def lattice_count_in_cyl(c: Cylinder) -> int:
    """Exact count of integer points in the cylinder.

    Counts per integer column: the in-band y range is an interval, whose
    interior is counted arithmetically while the up-to-four boundary
    candidates are adjudicated with the same comparison as cyl_contains,
    so the result always agrees with brute-force membership.
    """
    (ax, ay), (bx, by) = c.rect.a, c.rect.b
    if max(bx - ax, by - ay) > _LATTICE_EXTENT_GUARD:
        raise SizeError("cylinder extent exceeds the enumeration guard")
    x_lo, x_hi = math.ceil(ax), math.floor(bx)
    if x_lo > x_hi:
        return 0
    xs = np.arange(x_lo, x_hi + 1, dtype=np.int64)
    s = c.rect.slope
    h = by - ay
    yc = ay + s * (xs - ax)
    lo_f = np.maximum(yc - c.r * h, ay)
    hi_f = np.minimum(yc + c.r * h, by)
    lo = np.ceil(lo_f).astype(np.int64)
    hi = np.floor(hi_f).astype(np.int64)

    # strict interior [lo+1, hi-1] is certain: float error << 1 lattice unit
    count = int(np.maximum(hi - lo - 1, 0).sum())
    counted = []
    for cand in (lo - 1, lo, hi, hi + 1):
        m = _column_membership(c, xs, cand) & ((cand <= lo) | (cand >= hi))
        for prev_c, prev_m in counted:
            m &= ~(prev_m & (prev_c == cand))
        counted.append((cand, m))
        count += int(m.sum())
    return count


def check_slope_bound(a, b, c, d, r, v, w) -> bool:
    """Worst-case slope bound for points in the first and third of three
    stacked similar rectangles: with v in Cyl_r(Rect(a,b)) and w in
    Cyl_r(Rect(c,d)), the slope of (v,w) is within a factor (1+2r) of the
    common slope.  Precondition violations raise DomainError so tests can
    tell hypothesis failure from bound failure.
    """
    pts = (a, b, c, d)
    for p, q in zip(pts, pts[1:]):
        if not (p[0] < q[0] and p[1] < q[1]):
            raise DomainError("points must satisfy a < b < c < d coordinate-wise")
    s_ab, s_bc, s_cd = slope(a, b), slope(b, c), slope(c, d)
    if abs(s_ab - s_bc) > _RTOL * s_bc or abs(s_cd - s_bc) > _RTOL * s_bc:
        raise DomainError("the three rectangles must have equal slopes")
    for i in range(2):
        mid = c[i] - b[i]
        if mid < max(b[i] - a[i], d[i] - c[i]) * (1.0 - _RTOL):
            raise DomainError("middle rectangle must have weakly largest sides")
    if not (0.0 < r < 1.0):
        raise DomainError("r must lie in (0, 1)")
    cyl_ab = Cylinder(Rect(tuple(a), tuple(b)), r)
    cyl_cd = Cylinder(Rect(tuple(c), tuple(d)), r)
    if not cyl_contains(cyl_ab, v):
        raise DomainError("v must lie in Cyl_r(Rect(a, b))")
    if not cyl_contains(cyl_cd, w):
        raise DomainError("w must lie in Cyl_r(Rect(c, d))")

    ratio = slope(v, w) / s_bc
    factor = 1.0 + 2.0 * r
    return (1.0 - _RTOL) / factor <= ratio <= factor * (1.0 + _RTOL)


def cancellation_gap(xs, ys, delta):
    """Cauchy-Schwarz-with-cancellation pair: lhs = sum sqrt(x_j y_j) and
    rhs = (1 - delta^2) sqrt(x y), for positive splits whose per-block
    ratios y_j/x_j stay within a (1+delta) factor of y/x.  Callers assert
    lhs >= rhs; the equality case is ratio-constant splits.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1 or xs.size == 0:
        raise DomainError("xs and ys must be equal-length nonempty vectors")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("all entries must be positive")
    if delta <= 0:
        raise DomainError("delta must be positive")
    x, y = float(xs.sum()), float(ys.sum())
    ratio = (ys / xs) / (y / x)
    if np.any(ratio > (1.0 + delta) * (1.0 + _RTOL)) or \
       np.any(ratio < (1.0 - _RTOL) / (1.0 + delta)):
        raise DomainError("ratio constraint violated for the supplied delta")
    lhs = float(np.sqrt(xs * ys).sum())
    rhs = (1.0 - delta * delta) * math.sqrt(x * y)
    return lhs, rhs
