from __future__ import annotations

import json

import numpy as np
import pytest

from saeprev.bundle import load_artifact, save_artifact
from saeprev.data import dataset_to_csv
from saeprev.gate import GateBlockedError, GateOverrideRequired
from saeprev.summaries import SummaryOptions, summarize
from saeprev.synthetic import SyntheticDesignConfig, generate_synthetic, synthetic_geometry, synthetic_graph
from saeprev.workflow import load_bundle, run_fit


@pytest.fixture(scope="module")
def small_inputs(tmp_path_factory):
    """On-disk dataset + geometry for a 6x4 two-level synthetic design."""
    tmp = tmp_path_factory.mktemp("inputs")
    geometry = synthetic_geometry(6, admin2_per_admin1=4)
    graph = __import__("saeprev.graph", fromlist=["build_graph"]).build_graph(geometry=geometry)
    cfg = SyntheticDesignConfig(
        n_admin1=6, clusters_total=120, households_per_cluster=15,
        true_prevalence_field={"kind": "gradient", "low": 0.15, "high": 0.5},
        seed=21,
    )
    ds = generate_synthetic(cfg, graph)
    dataset_path = tmp / "dataset.csv"
    geometry_path = tmp / "geometry.geojson"
    dataset_path.write_text(dataset_to_csv(ds), encoding="utf-8")
    geometry_path.write_text(json.dumps(geometry), encoding="utf-8")
    return dataset_path, geometry_path


@pytest.fixture(scope="module")
def bundle(small_inputs):
    dataset_path, geometry_path = small_inputs
    return load_bundle(
        dataset_src=dataset_path,
        geometry_src=geometry_path,
        survey="synthetic", indicator="demo", reference=0.33,
    )


class TestLoadBundle:
    def test_round_trip(self, bundle):
        assert len(bundle.dataset) == 120
        assert bundle.dataset.admin_levels == {0, 1, 2}
        assert len(bundle.dataset_id) == 12

    def test_consistency_uses_reference(self, bundle):
        res = bundle.consistency()
        assert res["reference"] == 0.33
        assert res["status"] in ("pass", "fail")

    def test_gate_levels(self, bundle):
        g1 = bundle.gate(1)
        assert g1.n_areas == 6
        g2 = bundle.gate(2)
        assert g2.n_areas == 24


class TestRunFit:
    def test_direct_artifact(self, bundle):
        art = run_fit(bundle, "direct", 1, seed=4)
        assert art.method == "direct"
        assert art.samples is None
        assert len(art.summaries) == 6
        assert art.consistency["reference"] == 0.33

    def test_area_fit_round_trips_through_disk(self, bundle, tmp_path):
        art = run_fit(bundle, "area", 1, seed=4)
        save_artifact(art, tmp_path / "fit")
        loaded = load_artifact(tmp_path / "fit")
        assert loaded.fit_id == art.fit_id
        assert np.array_equal(loaded.samples, art.samples)
        assert loaded.summaries == art.summaries
        rows = summarize(loaded.posterior(), SummaryOptions(n_samples=art.samples.shape[0]))
        assert rows == summarize(art.posterior(), SummaryOptions(n_samples=art.samples.shape[0]))

    def test_unit_fit_has_samples_for_all_areas(self, bundle):
        art = run_fit(bundle, "unit", 2, seed=4, n_samples=500)
        assert art.samples.shape == (500, 24)
        assert len(art.area_ids) == 24

    def test_same_request_same_fit_id(self, bundle):
        a = run_fit(bundle, "direct", 1, seed=9)
        b = run_fit(bundle, "direct", 1, seed=9)
        assert a.fit_id == b.fit_id
        assert a.summaries == b.summaries

    def test_unknown_method(self, bundle):
        with pytest.raises(ValueError, match="unknown method"):
            run_fit(bundle, "bayesian", 1)


class TestGateFlow:
    @pytest.fixture
    def sparse_bundle(self, tmp_path):
        # 4 admin-1 areas; one p_hat=1 area and one empty -> 50% problem areas
        geometry = synthetic_geometry(4)
        rows = ["cluster_id,stratum_id,admin1_id,weight,n,y"]
        rows += [
            "c1,s1,A1_01,1.0,20,6",
            "c2,s1,A1_01,1.0,22,7",
            "c3,s2,A1_02,1.0,18,18",   # p_hat = 1 -> low information
            "c4,s3,A1_03,1.0,20,5",
            "c5,s3,A1_03,1.0,24,6",
        ]
        dataset = tmp_path / "d.csv"
        geom = tmp_path / "g.json"
        dataset.write_text("\n".join(rows) + "\n", encoding="utf-8")
        geom.write_text(json.dumps(geometry), encoding="utf-8")
        return load_bundle(dataset_src=dataset, geometry_src=geom)

    def test_area_blocked(self, sparse_bundle):
        with pytest.raises(GateBlockedError, match="cannot be fitted"):
            run_fit(sparse_bundle, "area", 1)

    def test_direct_warn_requires_override(self, sparse_bundle):
        with pytest.raises(GateOverrideRequired, match="override"):
            run_fit(sparse_bundle, "direct", 1)
        art = run_fit(sparse_bundle, "direct", 1, override=True)
        assert art.method == "direct"

    def test_unit_allowed_when_only_one_empty(self, sparse_bundle):
        # exactly 25% no-data areas: strict threshold leaves the unit model open
        assert sparse_bundle.gate(1).verdict("unit_level") == "allow"
        art = run_fit(sparse_bundle, "unit", 1, n_samples=200)
        assert art.method == "unit_level"
