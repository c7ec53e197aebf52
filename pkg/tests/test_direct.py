from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saeprev.direct import design_variance, hajek, national_consistency_check
from saeprev.synthetic import SyntheticDesignConfig, generate_synthetic, synthetic_graph

from .conftest import line_graph, make_dataset, simple_area_dataset
from .oracles import direct_oracle


@pytest.fixture
def g2():
    return line_graph(2)


class TestHajek:
    def test_hand_computed_ratio(self, g2):
        ds = simple_area_dataset(g2, {"A1": [(2.0, 2, 1), (1.0, 1, 0)], "A2": [(1.0, 4, 1)]})
        est = hajek(ds, 1)
        assert est.areas["A1"].p_hat == pytest.approx(0.4, abs=1e-15)

    def test_zero_cluster_area_flagged_no_data(self, g2):
        ds = simple_area_dataset(g2, {"A1": [(1.0, 10, 3)]})
        est = hajek(ds, 1)
        assert est.areas["A2"].flag == "no_data"
        assert est.areas["A2"].p_hat is None
        assert est.areas["A2"].n_clusters == 0

    def test_equal_weights_give_pooled_rate(self, g2):
        ds = simple_area_dataset(g2, {"A1": [(3.0, 10, 2), (3.0, 30, 9)]})
        est = hajek(ds, 1)
        assert est.areas["A1"].p_hat == pytest.approx(11 / 40, rel=1e-14)

    def test_convex_combination_bounds(self, g2):
        rng = np.random.default_rng(0)
        clusters = [(float(w), int(n), int(y)) for w, n, y in
                    zip(rng.uniform(0.5, 3, 12), rng.integers(5, 40, 12), rng.integers(0, 5, 12))]
        clusters = [(w, n, min(y, n)) for w, n, y in clusters]
        ds = simple_area_dataset(g2, {"A1": clusters})
        p = hajek(ds, 1).areas["A1"].p_hat
        rates = [y / n for _, n, y in clusters]
        assert min(rates) <= p <= max(rates)


class TestDesignVariance:
    def test_identical_clusters_low_information(self, g2):
        ds = simple_area_dataset(g2, {"A1": [(1.0, 10, 3), (1.0, 10, 3)]})
        est = design_variance(ds, 1)
        a = est.areas["A1"]
        assert a.flag == "low_information"
        assert a.p_hat == pytest.approx(0.3)
        assert a.var_p is None and a.ci_low is None

    def test_degenerate_point_estimate_low_information(self, g2):
        ds = simple_area_dataset(g2, {"A1": [(1.0, 10, 10), (1.0, 5, 5)]})
        est = design_variance(ds, 1)
        a = est.areas["A1"]
        assert a.flag == "low_information"
        assert a.p_hat == 1.0
        assert a.logit_var is None

    def test_single_cluster_stratum_notes(self, g2):
        ds = simple_area_dataset(g2, {"A1": [(1.0, 10, 3)]})
        est = design_variance(ds, 1)
        a = est.areas["A1"]
        assert a.flag == "low_information"
        assert any("single cluster" in note for note in a.notes)

    def test_interval_order_and_flags(self, g2):
        ds = simple_area_dataset(
            g2, {"A1": [(1.0, 20, 4), (2.0, 25, 9), (1.5, 30, 5)], "A2": [(1.0, 10, 2), (1.0, 12, 5)]}
        )
        est = design_variance(ds, 1)
        for a in est.areas.values():
            assert a.flag == "ok"
            assert a.ci_low <= a.p_hat <= a.ci_high
            assert 0.0 <= a.ci_low and a.ci_high <= 1.0

    def test_matches_loop_oracle_on_stratified_design(self):
        graph = synthetic_graph(6)
        cfg = SyntheticDesignConfig(
            n_admin1=6, clusters_total=90, households_per_cluster=20,
            true_prevalence_field={"kind": "gradient", "low": 0.2, "high": 0.5}, seed=4,
        )
        ds = generate_synthetic(cfg, graph)
        est = design_variance(ds, 1)
        oracle = direct_oracle(ds, 1)
        for aid, (p_ref, var_ref) in oracle.items():
            a = est.areas[aid]
            assert a.p_hat == pytest.approx(p_ref, rel=1e-12)
            if var_ref is not None and a.flag == "ok":
                assert a.var_p == pytest.approx(var_ref, rel=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(scale=st.floats(min_value=0.01, max_value=100.0))
    def test_weight_scale_invariance(self, scale):
        g = line_graph(2)
        base = [(1.0, 20, 4), (2.0, 25, 9), (1.5, 30, 5)]
        ds1 = simple_area_dataset(g, {"A1": base})
        ds2 = simple_area_dataset(g, {"A1": [(w * scale, n, y) for w, n, y in base]})
        a1 = design_variance(ds1, 1).areas["A1"]
        a2 = design_variance(ds2, 1).areas["A1"]
        assert a1.flag == a2.flag
        assert a1.p_hat == pytest.approx(a2.p_hat, rel=1e-12)
        assert a1.var_p == pytest.approx(a2.var_p, rel=1e-9)


class TestConsistencyCheck:
    def _national_dataset(self, reference):
        g = line_graph(2)
        rows = [
            ("c1", "s1", {0: "NAT", 1: "A1"}, 1.0, 100, 37),
            ("c2", "s1", {0: "NAT", 1: "A2"}, 1.0, 100, 37),
        ]
        return make_dataset(rows, g, reference=reference)

    def test_pass_within_tolerance(self):
        res = national_consistency_check(self._national_dataset(0.37))
        assert res["status"] == "pass"
        assert res["computed"] == pytest.approx(0.37)

    def test_fail_outside_tolerance(self):
        res = national_consistency_check(self._national_dataset(0.30))
        assert res["status"] == "fail"

    def test_no_reference(self):
        res = national_consistency_check(self._national_dataset(None))
        assert res["status"] == "no_reference"
