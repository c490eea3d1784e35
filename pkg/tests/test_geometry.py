import math

import numpy as np
import pytest

from lpplab.errors import DomainError, SizeError
from lpplab.geometry import (Cylinder, Rect, cancellation_gap,
                             check_slope_bound, cyl_contains,
                             lattice_count_in_cyl, slope)
from oracles import brute_cyl_count, shoelace


class TestSlope:
    def test_examples(self):
        assert slope((0, 0), (5, 5)) == 1.0
        assert slope((0, 0), (4, 1)) == 0.25
        assert slope((1, 1), (3, 5)) == 2.0

    def test_requires_strict_order(self):
        with pytest.raises(DomainError):
            slope((0, 0), (0, 5))
        with pytest.raises(DomainError):
            slope((2, 2), (1, 3))


class TestCylinder:
    def test_rect_validation(self):
        with pytest.raises(DomainError):
            Rect((0, 0), (0, 1))
        with pytest.raises(DomainError):
            Cylinder(Rect((0, 0), (1, 1)), 1.0)

    def test_membership_examples(self):
        c = Cylinder(Rect((0, 0), (10, 10)), 0.1)
        assert cyl_contains(c, (0, 0)) and cyl_contains(c, (10, 10))
        for t in np.linspace(0, 10, 23):
            assert cyl_contains(c, (t, t))  # the diagonal has deviation 0
        assert not cyl_contains(c, (0, 2))  # deviation 2 > r * height = 1
        assert not cyl_contains(c, (11, 11))  # outside the rectangle

    def test_membership_is_translation_invariant(self):
        base = Cylinder(Rect((0, 0), (7, 3)), 0.2)
        moved = Cylinder(Rect((100, 50), (107, 53)), 0.2)
        rng = np.random.default_rng(1)
        for _ in range(200):
            p = rng.uniform((0, 0), (7, 3))
            assert cyl_contains(base, p) == cyl_contains(moved, (p[0] + 100, p[1] + 50))

    def test_area_identity_against_shoelace(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a = rng.uniform(-50, 50, 2)
            wh = rng.uniform(0.1, 40, 2)
            r = rng.uniform(0.01, 0.99)
            c = Cylinder(Rect(tuple(a), tuple(a + wh)), r)
            poly = shoelace(c.polygon())
            assert c.area == pytest.approx(poly, rel=1e-12)
            assert c.area >= r * c.rect.area  # the bound used by the construction


class TestLatticeCount:
    def test_wide_cylinder_bounds(self):
        c = Cylinder(Rect((0, 0), (10, 10)), 0.999)
        count = lattice_count_in_cyl(c)
        assert c.area - 100 * 10 <= count <= 11 ** 2

    def test_exact_on_small_rect(self):
        c = Cylinder(Rect((0, 0), (4, 4)), 0.5)
        assert lattice_count_in_cyl(c) == brute_cyl_count(c)

    def test_empty_intersection(self):
        c = Cylinder(Rect((0.4, 0.4), (0.6, 0.6)), 0.5)
        assert lattice_count_in_cyl(c) == 0

    def test_extent_guard(self):
        with pytest.raises(SizeError):
            lattice_count_in_cyl(Cylinder(Rect((0, 0), (2 * 10 ** 5, 10)), 0.5))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            a = rng.uniform(-20, 20, 2)
            wh = rng.uniform(0.5, 30, 2)
            r = rng.uniform(0.02, 0.98)
            c = Cylinder(Rect(tuple(a), tuple(a + wh)), r)
            assert lattice_count_in_cyl(c) == brute_cyl_count(c)

    def test_count_lower_bound_property(self):
        # count >= area - 100 * max side whenever the cylinder is nonempty
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(2000):
            r = rng.uniform(0.01, 0.99)
            wh = rng.uniform(10 / r, min(1000.0, 10 / r * 5), 2)
            a = rng.uniform(-100, 100, 2)
            c = Cylinder(Rect(tuple(a), tuple(a + wh)), r)
            count = lattice_count_in_cyl(c)
            if count == 0:
                continue
            checked += 1
            assert count >= c.area - 100 * max(c.rect.width, c.rect.height)
        assert checked > 1900


def _slope_config(rng):
    w, h = rng.uniform(0.1, 10, 2)
    s1, s3 = rng.uniform(0.05, 1.0, 2)
    a = rng.uniform(-5, 5, 2)
    b = a + (s1 * w, s1 * h)
    c = b + (w, h)
    d = c + (s3 * w, s3 * h)
    r = rng.uniform(0.02, 0.98)

    def sample_in_cyl(p, q):
        x = rng.uniform(p[0], q[0])
        dev = rng.uniform(-r, r) * (q[1] - p[1])
        y = p[1] + (q[1] - p[1]) / (q[0] - p[0]) * (x - p[0]) + dev
        return (x, min(max(y, p[1]), q[1]))

    return a, b, c, d, r, sample_in_cyl(a, b), sample_in_cyl(c, d)


class TestSlopeBound:
    def test_endpoints_on_diagonal(self):
        a, b, c, d = (0, 0), (1, 1), (3, 3), (4, 4)
        assert check_slope_bound(a, b, c, d, 0.3, b, c)

    def test_extremal_configuration(self):
        # congruent unit squares; v on the upper cylinder edge, w on the
        # lower edge, pushed together: slope ratio exactly 1/(1+2r)
        r = 0.25
        a, b, c, d = (0, 0), (1, 1), (2, 2), (3, 3)
        v, w = (1 - r, 1.0), (2 + r, 2.0)
        ratio = slope(v, w) / slope(b, c)
        assert ratio == pytest.approx(1 / (1 + 2 * r), rel=1e-12)
        assert check_slope_bound(a, b, c, d, r, v, w)

    def test_hypothesis_violations_raise(self):
        a, b, c, d = (0, 0), (2, 2), (3, 3), (4, 4)
        with pytest.raises(DomainError):  # middle not weakly largest
            check_slope_bound(a, b, c, d, 0.2, (1, 1), (3.5, 3.5))
        with pytest.raises(DomainError):  # unequal slopes
            check_slope_bound((0, 0), (1, 2), (2, 3), (3, 5), 0.2, (0.5, 1), (2.5, 4))
        with pytest.raises(DomainError):  # v outside its cylinder
            check_slope_bound((0, 0), (1, 1), (2, 2), (3, 3), 0.05, (0, 0.9), (2.5, 2.5))

    def test_random_conforming_configurations(self):
        rng = np.random.default_rng(23)
        for _ in range(10 ** 5):
            a, b, c, d, r, v, w = _slope_config(rng)
            assert check_slope_bound(a, b, c, d, r, v, w)


def _feasible_split(rng, delta):
    m = rng.integers(2, 12)
    xs = rng.uniform(0.1, 10, m)
    base = rng.uniform(0.2, 5)
    # per-block ratios within (1 + delta/3)^(+-1) of base keeps the global
    # constraint within (1 + delta)^(+-1) after renormalizing by y/x
    lo, hi = 1 / (1 + delta / 3), 1 + delta / 3
    ys = xs * base * rng.uniform(lo, hi, m)
    return xs, ys


class TestCancellation:
    def test_equal_ratio_split_is_tight(self):
        xs = np.array([1.0, 2.0, 3.5])
        ys = 0.7 * xs
        lhs, rhs = cancellation_gap(xs, ys, 0.05)
        x, y = xs.sum(), ys.sum()
        assert lhs == pytest.approx(math.sqrt(x * y), rel=1e-12)
        assert lhs - rhs == pytest.approx(0.05 ** 2 * math.sqrt(x * y), rel=1e-9)

    def test_two_block_example(self):
        delta = 0.05
        xs = np.array([1.0, 1.0])
        ys = np.array([1.0 + delta / 3, 1.0 - delta / 3])
        lhs, rhs = cancellation_gap(xs, ys, delta)
        assert lhs >= rhs

    def test_random_feasible_splits(self):
        rng = np.random.default_rng(31)
        for _ in range(10 ** 4):
            delta = rng.uniform(0.005, 0.1)
            xs, ys = _feasible_split(rng, delta)
            lhs, rhs = cancellation_gap(xs, ys, delta)
            assert lhs >= rhs

    def test_ratio_violation_raises(self):
        with pytest.raises(DomainError):
            cancellation_gap([1.0, 1.0], [2.0, 0.5], 0.05)
        with pytest.raises(DomainError):
            cancellation_gap([1.0, -1.0], [1.0, 1.0], 0.05)
