from __future__ import annotations

import json

import pytest

from saeprev.cli import main
from saeprev.data import dataset_to_csv
from saeprev.synthetic import SyntheticDesignConfig, generate_synthetic, synthetic_geometry


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    from saeprev.graph import build_graph

    tmp = tmp_path_factory.mktemp("cli-in")
    geometry = synthetic_geometry(6, admin2_per_admin1=4)
    graph = build_graph(geometry=geometry)
    cfg = SyntheticDesignConfig(
        n_admin1=6, clusters_total=120, households_per_cluster=15,
        true_prevalence_field={"kind": "gradient", "low": 0.15, "high": 0.5},
        seed=21,
    )
    ds = generate_synthetic(cfg, graph)
    dataset = tmp / "dataset.csv"
    geom = tmp / "geometry.geojson"
    dataset.write_text(dataset_to_csv(ds), encoding="utf-8")
    geom.write_text(json.dumps(geometry), encoding="utf-8")
    return dataset, geom


@pytest.fixture(scope="module")
def sparse_inputs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli-sparse")
    geometry = synthetic_geometry(4)
    rows = [
        "cluster_id,stratum_id,admin1_id,weight,n,y",
        "c1,s1,A1_01,1.0,20,6",
        "c2,s1,A1_01,1.0,22,7",
        "c3,s2,A1_02,1.0,18,18",
        "c4,s3,A1_03,1.0,20,5",
        "c5,s3,A1_03,1.0,24,6",
    ]
    dataset = tmp / "d.csv"
    geom = tmp / "g.json"
    dataset.write_text("\n".join(rows) + "\n", encoding="utf-8")
    geom.write_text(json.dumps(geometry), encoding="utf-8")
    return dataset, geom


class TestCheck:
    def test_check_prints_gate_and_consistency(self, inputs, capsys):
        dataset, geom = inputs
        code = main([
            "check", "--dataset", str(dataset), "--geometry", str(geom),
            "--reference", "0.33", "--level", "1", "--level", "2",
        ])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["consistency"]["reference"] == 0.33
        assert [g["level"] for g in out["gates"]] == [1, 2]

    def test_check_on_sparse_fixture_prints_warning_exit_zero(self, sparse_inputs, capsys):
        dataset, geom = sparse_inputs
        code = main(["check", "--dataset", str(dataset), "--geometry", str(geom), "--level", "1"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        messages = out["gates"][0]["messages"]
        assert any(m.startswith("Direct estimates:") for m in messages)

    def test_validation_failure_machine_readable(self, inputs, tmp_path, capsys):
        _, geom = inputs
        bad = tmp_path / "bad.csv"
        bad.write_text("cluster_id,stratum_id,admin1_id,weight,n,y\nc1,s1,A1_01,1.0,3,5\n")
        code = main(["check", "--dataset", str(bad), "--geometry", str(geom)])
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "DatasetError"
        assert "successes exceed trials" in err["error"]["message"]


class TestFit:
    def test_fit_writes_bundle(self, inputs, tmp_path, capsys):
        dataset, geom = inputs
        out = tmp_path / "fit-direct"
        code = main([
            "fit", "--dataset", str(dataset), "--geometry", str(geom),
            "--method", "direct", "--level", "1", "--seed", "5", "--out", str(out),
        ])
        assert code == 0
        assert (out / "fit.json").exists()
        assert (out / "tabulation.csv").exists()
        info = json.loads(capsys.readouterr().out)
        assert info["method"] == "direct" and info["seed"] == 5

    def test_gate_blocked_fit_exits_nonzero_with_service_message(self, sparse_inputs, capsys):
        dataset, geom = sparse_inputs
        code = main([
            "fit", "--dataset", str(dataset), "--geometry", str(geom),
            "--method", "area", "--level", "1", "--out", "/tmp/should-not-exist",
        ])
        assert code == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"]["type"] == "GateBlockedError"
        assert any("cannot be fitted" in m for m in err["error"]["messages"])

    def test_override_allows_warned_direct(self, sparse_inputs, tmp_path, capsys):
        dataset, geom = sparse_inputs
        out = tmp_path / "fit-direct-override"
        code = main([
            "fit", "--dataset", str(dataset), "--geometry", str(geom),
            "--method", "direct", "--level", "1", "--override", "--out", str(out),
        ])
        assert code == 0


@pytest.fixture(scope="module")
def fits(inputs, tmp_path_factory):
    dataset, geom = inputs
    tmp = tmp_path_factory.mktemp("cli-fits")
    argsets = [
        ("direct", tmp / "direct"),
        ("area", tmp / "area"),
    ]
    for method, out in argsets:
        code = main([
            "fit", "--dataset", str(dataset), "--geometry", str(geom),
            "--method", method, "--level", "1", "--seed", "7", "--out", str(out),
        ])
        assert code == 0
    return {m: o for m, o in argsets}


class TestSummarizeAndReport:

    def test_summarize_writes_tabulation_figures(self, fits, tmp_path, capsys):
        out = tmp_path / "summary"
        code = main([
            "summarize", "--fit", str(fits["area"]), "--p0", "0.3", "--out", str(out),
        ])
        assert code == 0
        assert (out / "tabulation.csv").exists()
        plot_data = json.loads((out / "plot_data.json").read_text())
        assert "exceedance" in plot_data["map_stats"]
        pngs = list(out.glob("*.png"))
        assert pngs, "figures should be rendered next to the delimited output"
        for png in pngs:
            assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_report_compiles_fits(self, fits, tmp_path, capsys):
        out = tmp_path / "report"
        code = main([
            "report", "--fit", str(fits["direct"]), "--fit", str(fits["area"]),
            "--p0", "0.3", "--out", str(out),
        ])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["models"]) == 2
        assert (out / "tabulation.csv").exists()
        assert list(out.glob("map_*.png")) and list(out.glob("scatter_*.png"))


class TestSimulate:
    def test_simulate_deterministic(self, tmp_path, capsys):
        cfg = tmp_path / "design.cfg"
        cfg.write_text(
            "n_admin1 = 5\nclusters_total = 60\nhouseholds_per_cluster = 10\n"
            "prevalence_kind = gradient\nprevalence_low = 0.1\nprevalence_high = 0.4\n"
        )
        out1, out2 = tmp_path / "sim1", tmp_path / "sim2"
        for out in (out1, out2):
            code = main(["simulate", "--config", str(cfg), "--seed", "7", "--out", str(out)])
            assert code == 0
        assert (out1 / "dataset.csv").read_bytes() == (out2 / "dataset.csv").read_bytes()
        assert (out1 / "geometry.geojson").read_bytes() == (out2 / "geometry.geojson").read_bytes()

    def test_simulated_dataset_loads(self, tmp_path, capsys):
        cfg = tmp_path / "design.cfg"
        cfg.write_text("n_admin1 = 4\nclusters_total = 40\nhouseholds_per_cluster = 8\n")
        out = tmp_path / "sim"
        assert main(["simulate", "--config", str(cfg), "--seed", "1", "--out", str(out)]) == 0
        code = main([
            "check", "--dataset", str(out / "dataset.csv"),
            "--geometry", str(out / "geometry.geojson"), "--level", "1",
        ])
        assert code == 0
