import math

import numpy as np
import pytest

from lpplab import construct
from lpplab.construct import (BENCHMARK_HIT_FRACTION, MultiScaleParams,
                              build_brw_path, build_heavy_path,
                              cylinder_hit_stats, heavy_params,
                              reference_bound, scale_purity, verify_apriori)
from lpplab.env import EnvironmentSpec, make_field, scale_of
from lpplab.errors import (DegenerateError, DomainError, InfeasibleError)
from lpplab.lpp import (check_directed_path, geodesic, last_passage, ltr_sum,
                        path_weights)


class TestHeavyParams:
    def test_asymptotic_values_are_desk_degenerate(self):
        p = heavy_params(2 ** 13)
        assert p.s == 370 and p.M == 0 and p.degenerate
        assert p.source == "paper-asymptotic"
        assert p.lam == pytest.approx(13 ** 0.25)
        assert p.rho == pytest.approx(math.sqrt(math.log2(13)))

    def test_override_feasibility(self):
        p = heavy_params(2 ** 16, s=2, M=4)
        assert (p.s, p.M, p.source, p.degenerate) == (2, 4, "desk-override", False)
        with pytest.raises(InfeasibleError):
            heavy_params(2 ** 16, s=4, M=4)  # 16 > 14
        with pytest.raises(DomainError):
            heavy_params(2 ** 16, s=2)  # partial override
        with pytest.raises(DomainError):
            heavy_params(2)


def _build(n=2 ** 10, s=2, M=3, seed=5):
    spec = EnvironmentSpec(kind="iid-pareto2", n=n, seed=seed)
    field = make_field(spec)
    params = heavy_params(n, s=s, M=M)
    path, levels = build_heavy_path(field, params)
    return field, params, path, levels


class TestHeavyConstruction:
    def test_path_and_levels_invariants(self):
        field, params, path, levels = _build()
        assert check_directed_path(path, field.shape)
        assert len(levels.levels) == params.M + 1
        # every selected vertex lies on the final path, in order
        path_set = {tuple(v) for v in path}
        assert all(tuple(v) in path_set for v in levels.levels[-1])
        assert verify_apriori(levels, params).all_ok
        assert scale_purity(levels, field)

    def test_level_increments_match_scale_recount(self):
        # filtering the final vertex set by scale recovers each level's increment
        field, params, path, levels = _build(seed=9)
        n = field.spec.n
        corners = {(0, 0), (n, n)}
        final = [tuple(v) for v in levels.levels[-1]]
        added = 0
        for lvl in range(1, params.M + 1):
            inc = {tuple(v) for v in levels.levels[lvl]} - \
                  {tuple(v) for v in levels.levels[lvl - 1]}
            recount = {v for v in final if v not in corners
                       and scale_of(field.at(v), n) == lvl * params.s}
            assert inc == recount
            added += len(inc)
        assert added == len(final) - 2
        assert added > 0  # the run actually selected vertices

    def test_dominance(self):
        for seed in range(3):
            field, params, path, levels = _build(seed=seed)
            assert ltr_sum(path_weights(field, path)) <= last_passage(field)

    def test_counts_follow_area_rule(self):
        field, params, _, levels = _build(seed=2)
        lam = params.lam
        n = field.spec.n
        for lvl, (rects, counts) in enumerate(zip(levels.rects, levels.counts)):
            for (a, b), m in zip(rects, counts):
                area = (b[0] - a[0]) * (b[1] - a[1])
                exact = 2 ** ((lvl + 1) * params.s) * math.sqrt(area) / (lam * n)
                assert m <= exact + 1e-9 and m >= exact - 1 - 1e-9

    def test_trivial_when_no_cylinders(self):
        # M = 1 with m too small to scan leaves only the corner vertices
        field, params, path, levels = _build(n=2 ** 8, s=1, M=1, seed=3)
        assert [len(v) for v in levels.levels] == [2, 2]
        n = field.spec.n
        expect = [(i, 0) for i in range(n + 1)] + [(n, j) for j in range(1, n + 1)]
        assert np.array_equal(path, np.asarray(expect))

    def test_degenerate_error_when_every_count_zero(self):
        # lambda > 2^s makes even the root rectangle too small to subdivide
        spec = EnvironmentSpec(kind="iid-pareto2", n=2 ** 17, seed=1)
        field = make_field(spec)
        params = heavy_params(2 ** 17, s=1, M=1)
        with pytest.raises(DegenerateError):
            build_heavy_path(field, params)

    def test_rejects_wrong_field(self):
        field = make_field(EnvironmentSpec(kind="brw", n=16, seed=0))
        with pytest.raises(DomainError):
            build_heavy_path(field, heavy_params(16, s=1, M=1))

    def test_hit_stats(self):
        field, params, _, _ = _build(seed=5)
        stats = cylinder_hit_stats(field, params)
        assert set(stats) == {1, 2, 3}
        assert stats[1] is None  # no cylinder scanned at the coarsest level
        for lvl in (2, 3):
            assert 0.0 <= stats[lvl] <= 1.0
        assert 0.0 < BENCHMARK_HIT_FRACTION < 1.0


class TestBrwConstruction:
    def test_square_count_identity(self):
        field = make_field(EnvironmentSpec(kind="brw", n=2 ** 6, seed=7))
        _, choices, _, _ = build_brw_path(field, 2)
        per_level = {}
        for c in choices:
            per_level[c.level] = per_level.get(c.level, 0) + 1
        assert per_level == {l: (2 ** 2 - 1) ** l for l in per_level}
        assert sorted(per_level) == [0, 1, 2]

    def test_choice_is_argmax(self):
        field = make_field(EnvironmentSpec(kind="brw", n=2 ** 5, seed=11))
        _, choices, _, _ = build_brw_path(field, 2)
        n, m = 2 ** 5, 5
        for c in choices:
            x0, y0 = c.square.a
            side = c.square.b[0] - x0
            h = side >> 2
            k = (c.level + 1) * 2
            shift = m - k
            js = np.arange(1, 4)
            zu = float((2 * h - 1) * field.brw_xi(k, (x0 >> shift) + js - 1,
                                                  (y0 >> shift) + js).sum())
            zd = float((2 * h - 1) * field.brw_xi(k, (x0 >> shift) + js,
                                                  (y0 >> shift) + js - 1).sum())
            assert c.gain == max(zu, zd)
            assert c.alternative_gain == min(zu, zd)
            assert c.choice == ("up" if zu >= zd else "down")
            assert c.gain >= c.alternative_gain

    def test_weight_decomposition_and_dominance(self):
        for seed in range(3):
            field = make_field(EnvironmentSpec(kind="brw", n=2 ** 6, seed=seed))
            path, _, l1, l2 = build_brw_path(field, 2)
            assert check_directed_path(path, field.shape)
            w = ltr_sum(path_weights(field, path))
            assert l1 + l2 == pytest.approx(w, rel=1e-9)
            assert w <= last_passage(field)

    def test_non_dividing_separation_truncates(self):
        field = make_field(EnvironmentSpec(kind="brw", n=2 ** 7, seed=2))
        path, choices, _, _ = build_brw_path(field, 3)  # M = 7 // 3 = 2
        assert max(c.level for c in choices) == 1
        assert check_directed_path(path, field.shape)

    def test_separation_guards(self):
        field = make_field(EnvironmentSpec(kind="brw", n=16, seed=0))
        with pytest.raises(DegenerateError):
            build_brw_path(field, 5)
        with pytest.raises(DomainError):
            build_brw_path(field, 0)
        iid = make_field(EnvironmentSpec(kind="iid-pareto2", n=16, seed=0))
        with pytest.raises(DomainError):
            build_brw_path(iid, 2)


class TestReferenceBound:
    def test_shapes(self):
        n = 2 ** 10
        ll = math.log2(math.log2(n))
        assert reference_bound(n, "heavy") == pytest.approx(
            n * math.log2(n) ** 0.75 / ll)
        assert reference_bound(n, "brw") == pytest.approx(
            n * math.log2(n) ** 0.5 / ll)
        assert reference_bound(n, "heavy", d=2) == pytest.approx(
            n * math.log2(n) ** (4 / 6) / ll)
        assert reference_bound(n, "logcorrected", beta=1.2) == pytest.approx(
            n * math.log2(n) ** (0.75 - 0.6) / ll)

    def test_errors(self):
        with pytest.raises(DomainError):
            reference_bound(2, "heavy")
        with pytest.raises(DomainError):
            reference_bound(2 ** 10, "logcorrected")
