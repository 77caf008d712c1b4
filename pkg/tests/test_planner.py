import csv

import numpy as np
import pytest

from errmoments.model import ModelError
from errmoments.planner import (
    CSV_COLUMNS,
    DEFAULT_PS,
    DEFAULT_TAUS,
    PlanQuery,
    kappa,
    min_n,
    plan_table,
    write_plan_csv,
)

# reference minimum sample sizes, beta = 1, p = 2 ... 128
TABLE_CONDITIONAL = {
    0.1: [14, 22, 38, 70, 132, 256, 506],
    0.09: [18, 28, 48, 86, 164, 318, 626],
    0.08: [24, 36, 60, 110, 208, 404, 796],
    0.07: [32, 48, 80, 144, 272, 530, 1044],
    0.06: [44, 64, 108, 196, 372, 722, 1424],
    0.05: [62, 94, 158, 284, 538, 1044, 2056],
}


class TestKappa:
    def test_table_crossing_p2(self):
        assert kappa(14, 2) < 0.1 <= kappa(12, 2)

    def test_table_crossing_p128(self):
        k = kappa(np.arange(2050, 2062, 2), 128)
        # the crossing sits within one even step of the reference 2056
        first = 2050 + 2 * int(np.argmax(k < 0.05))
        assert abs(first - 2056) <= 2
        assert kappa(2056, 128) == pytest.approx(0.05, abs=5e-6)  # a razor-edge cell

    def test_decreasing_in_n(self):
        for p in (2, 16, 128):
            k = kappa(np.arange(40, 202, 2), p)
            assert np.all(np.diff(k) < 0)

    def test_nonincreasing_in_beta(self):
        for n in (20, 100, 400):
            for p in (4, 64):
                ks = [kappa(n, p, beta) for beta in (0.5, 1.0, 2.0)]
                assert ks[0] >= ks[1] >= ks[2]

    def test_vector_matches_scalar(self):
        ns = np.array([4, 10, 200])
        for mode in ("conditional", "unconditional"):
            vec = kappa(ns, 8, 1.5, mode)
            assert vec == pytest.approx([float(kappa(int(n), 8, 1.5, mode)) for n in ns], abs=1e-15)

    @pytest.mark.parametrize("n", [3, 0, -2])
    def test_bad_n(self, n):
        with pytest.raises(ModelError):
            kappa(n, 4)

    def test_vanishing_prior(self):
        with pytest.raises(ModelError):
            kappa(4, 4, beta=1e-12)
        with pytest.raises(ValueError):
            kappa(4, 4, mode="both")


class TestMinN:
    def test_conditional_top_row(self):
        got = [min_n(PlanQuery("conditional", p, 0.1)).n_min for p in DEFAULT_PS]
        assert got == TABLE_CONDITIONAL[0.1]

    def test_unconditional_examples(self):
        assert min_n(PlanQuery("unconditional", 2, 0.025, rule="safe")).n_min == 108
        assert min_n(PlanQuery("unconditional", 128, 0.005, rule="safe")).n_min == 2720

    def test_literal_rule_stops_before_the_peak(self):
        # the unconditional curve starts below tau for large p, rises, then falls
        lit = min_n(PlanQuery("unconditional", 128, 0.005, rule="literal"))
        safe = min_n(PlanQuery("unconditional", 128, 0.005, rule="safe"))
        assert lit.n_min == 4 and safe.n_min == 2720
        assert lit.trace[-1, 0] == 4

    def test_scan_start(self):
        res = min_n(PlanQuery("unconditional", 128, 0.025, rule="safe", n_start=2))
        assert res.n_min == 2

    def test_easy_target(self):
        for mode in ("conditional", "unconditional"):
            res = min_n(PlanQuery(mode, 16, 0.5))
            assert res.n_min == 4
            assert res.kappa_at_n < 0.5

    def test_literal_result_is_first_crossing(self):
        res = min_n(PlanQuery("conditional", 8, 0.07))
        assert res.kappa_at_n < 0.07 <= kappa(res.n_min - 2, 8)
        assert res.trace[-1, 0] == res.n_min
        assert np.all(res.trace[:-1, 1] >= 0.07)

    def test_safe_result_holds_over_horizon(self):
        q = PlanQuery("unconditional", 32, 0.01, rule="safe", horizon=100)
        res = min_n(q)
        ns = np.arange(res.n_min, res.n_min + q.horizon + 2, 2)
        assert np.all(kappa(ns, 32, 1.0, "unconditional") < 0.01)
        assert kappa(res.n_min - 2, 32, 1.0, "unconditional") >= 0.01

    def test_not_found(self):
        res = min_n(PlanQuery("conditional", 128, 0.01, n_max=500))
        assert not res.found
        assert res.n_min is None and res.kappa_at_n is None
        assert res.trace[0, 0] == 4 and res.trace[-1, 0] == 500
        assert np.all(res.trace[:, 1] >= 0.01)

    @pytest.mark.parametrize("kw", [dict(tau=0.0), dict(tau=1.0), dict(p=0), dict(beta=0.0), dict(n_max=101),
                                    dict(n_max=2), dict(rule="greedy"), dict(mode="x"), dict(n_start=3),
                                    dict(horizon=-2), dict(horizon=3)])
    def test_invalid_query(self, kw):
        args = dict(mode="conditional", p=4, tau=0.1)
        args.update(kw)
        with pytest.raises(ModelError):
            PlanQuery(**args)


class TestPlanTable:
    def test_matches_individual_queries(self):
        grid = plan_table("unconditional", rule="safe", taus=(0.02, 0.01), ps=(4, 64))
        for r in grid:
            assert r.n_min == min_n(r.query).n_min

    def test_monotone_response(self):
        for mode in ("conditional", "unconditional"):
            grid = plan_table(mode, rule="safe")
            taus = DEFAULT_TAUS[mode]
            n = np.array([r.n_min for r in grid]).reshape(len(DEFAULT_PS), len(taus))  # (p, tau)
            # taus are listed in decreasing order, so n grows along that axis
            assert np.all(np.diff(n, axis=1) >= 0)
            if mode == "conditional":
                assert np.all(np.diff(n, axis=0) >= 0)

    def test_conditional_block_close_to_table(self):
        grid = plan_table("conditional")
        for r in grid:
            expect = TABLE_CONDITIONAL[r.query.tau][DEFAULT_PS.index(r.query.p)]
            assert abs(r.n_min - expect) <= 2, (r.query.tau, r.query.p, r.n_min, expect)

    def test_csv(self, tmp_path):
        grid = plan_table("conditional", taus=(0.1,), ps=(2, 128), n_max=200)
        path = tmp_path / "plan.csv"
        write_plan_csv(grid, path)
        rows = list(csv.reader(open(path)))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert rows[1][:3] == ["0.1", "2", "14"]
        assert float(rows[1][3]) < 0.1
        assert rows[2][2] == ">200" and rows[2][3] == ""
        assert rows[1][4:] == ["conditional", "1.0"]
