"""The CLI and the HTTP service must produce identical numbers for
identical inputs and seeds: both run through the shared workflow, checked
here by comparing tabulation bytes end to end."""

from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from saeprev.cli import main
from saeprev.service import create_app

from .test_cli import inputs  # noqa: F401


@pytest.mark.parametrize("method,level", [("direct", 1), ("area", 1), ("unit", 1)])
def test_cli_and_http_tabulations_identical(inputs, tmp_path, capsys, method, level):  # noqa: F811
    dataset, geom = inputs
    out = tmp_path / f"cli-{method}"
    code = main([
        "fit", "--dataset", str(dataset), "--geometry", str(geom),
        "--method", method, "--level", str(level), "--seed", "23", "--out", str(out),
    ])
    assert code == 0
    capsys.readouterr()
    cli_bytes = (out / "tabulation.csv").read_bytes()

    app = create_app(tmp_path / "svc", default_seed=0)
    with TestClient(app) as client:
        resp = client.post(
            "/datasets",
            files={
                "dataset": ("dataset.csv", dataset.read_text(), "text/csv"),
                "geometry": ("geometry.geojson", geom.read_text(), "application/json"),
            },
        )
        dataset_id = resp.json()["dataset_id"]
        resp = client.post(
            "/fits",
            json={"dataset_id": dataset_id, "method": method, "level": level, "seed": 23},
        )
        job_id = resp.json()["job_id"]
        deadline = time.time() + 120
        while time.time() < deadline:
            job = client.get(f"/jobs/{job_id}").json()
            if job["status"] in ("done", "failed"):
                break
            time.sleep(0.05)
        assert job["status"] == "done", job
        http_bytes = client.get(f"/fits/{job_id}/tabulation").content

    assert cli_bytes == http_bytes
