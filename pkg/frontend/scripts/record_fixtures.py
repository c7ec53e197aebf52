#!/usr/bin/env python3
"""Record real service responses as JSON/CSV fixtures for the UI tests.

Boots the estimation service in-process, uploads two synthetic datasets
(one healthy, one sparse enough to trip the gate), runs fits, and captures
every endpoint the UI consumes. Rerun after engine changes:

    python3 frontend/scripts/record_fixtures.py
"""

from __future__ import annotations

import json
import tempfile
import time
from pathlib import Path

from fastapi.testclient import TestClient

from saeprev.data import dataset_to_csv
from saeprev.service import create_app
from saeprev.synthetic import SyntheticDesignConfig, generate_synthetic, synthetic_geometry

OUT = Path(__file__).resolve().parent.parent / "src" / "fixtures"

SPARSE_ROWS = [
    "cluster_id,stratum_id,admin1_id,weight,n,y",
    "c1,s1,A1_01,1.0,20,6",
    "c2,s1,A1_01,1.0,22,7",
    "c3,s2,A1_02,1.0,18,18",
    "c4,s3,A1_03,1.0,20,5",
    "c5,s3,A1_03,1.0,24,6",
]


def wait_done(client, job_id):
    for _ in range(1200):
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] in ("done", "failed"):
            assert job["status"] == "done", job
            return job
        time.sleep(0.05)
    raise TimeoutError(job_id)


def dump(name: str, payload) -> None:
    path = OUT / name
    if isinstance(payload, (bytes, str)):
        mode = "wb" if isinstance(payload, bytes) else "w"
        with open(path, mode) as fh:
            fh.write(payload)
    else:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(OUT.parent.parent)}")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    from saeprev.graph import build_graph

    geometry = synthetic_geometry(6, admin2_per_admin1=4)
    graph = build_graph(geometry=geometry)
    cfg = SyntheticDesignConfig(
        n_admin1=6, clusters_total=120, households_per_cluster=15,
        true_prevalence_field={"kind": "gradient", "low": 0.15, "high": 0.5},
        seed=21,
    )
    dataset_csv = dataset_to_csv(generate_synthetic(cfg, graph))
    sparse_geometry = synthetic_geometry(4)

    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(tmp, default_seed=0)
        with TestClient(app) as client:
            resp = client.post(
                "/datasets",
                files={
                    "dataset": ("dataset.csv", dataset_csv, "text/csv"),
                    "geometry": ("geometry.geojson", json.dumps(geometry), "application/json"),
                },
                data={"survey": "synthetic-demo", "indicator": "demo-indicator",
                      "reference_estimate": "0.33"},
            )
            main_id = resp.json()["dataset_id"]
            dump("dataset_main.json", resp.json())
            dump("geometry_main.json", geometry)

            resp = client.post(
                "/datasets",
                files={
                    "dataset": ("d.csv", "\n".join(SPARSE_ROWS) + "\n", "text/csv"),
                    "geometry": ("g.json", json.dumps(sparse_geometry), "application/json"),
                },
            )
            sparse_id = resp.json()["dataset_id"]
            dump("dataset_sparse.json", resp.json())
            dump("geometry_sparse.json", sparse_geometry)

            dump("clusters_main_L1.json", client.get(
                f"/datasets/{main_id}/clusters", params={"level": 1}).json())
            dump("consistency_main.json", client.get(
                f"/datasets/{main_id}/consistency").json())
            dump("gate_main_L1.json", client.get(
                f"/datasets/{main_id}/gate", params={"level": 1}).json())
            dump("gate_main_L2.json", client.get(
                f"/datasets/{main_id}/gate", params={"level": 2}).json())
            dump("gate_sparse_L1.json", client.get(
                f"/datasets/{sparse_id}/gate", params={"level": 1}).json())

            refusal = client.post(
                "/fits", json={"dataset_id": sparse_id, "method": "area", "level": 1})
            assert refusal.status_code == 403
            dump("refusal_area_sparse.json", refusal.json())
            refusal = client.post(
                "/fits", json={"dataset_id": sparse_id, "method": "direct", "level": 1})
            assert refusal.status_code == 403
            dump("refusal_direct_sparse.json", refusal.json())

            fits = {}
            for method in ("direct", "area", "unit"):
                resp = client.post("/fits", json={
                    "dataset_id": main_id, "method": method, "level": 1, "seed": 7,
                })
                job_id = resp.json()["job_id"]
                dump(f"job_created_{method}.json", resp.json())
                job = wait_done(client, job_id)
                fits[method] = job_id
            dump("job_done_area.json", client.get(f"/jobs/{fits['area']}").json())

            dump("summaries_direct_L1.json", client.get(
                f"/fits/{fits['direct']}/summaries").json())
            dump("summaries_area_L1.json", client.get(
                f"/fits/{fits['area']}/summaries").json())
            for p0 in ("0.25", "0.30", "0.37", "0.45"):
                dump(f"exceedance_area_p{p0.replace('.', '')}.json", client.get(
                    f"/fits/{fits['area']}/exceedance", params={"p0": p0}).json())
            dump("ridge_area_L1.json", client.get(
                f"/fits/{fits['area']}/ridge", params={"selection": "all_level1"}).json())
            dump("compare_cv_direct_area.json", client.get(
                "/compare", params={
                    "fit_a": fits["direct"], "fit_b": fits["area"], "stat": "cv"},
            ).json())
            dump("tabulation_area_L1.csv", client.get(
                f"/fits/{fits['area']}/tabulation").content)
            dump("report_main.json", client.post(
                "/reports", json={"fit_ids": [fits["direct"], fits["area"]], "p0": 0.33},
            ).json())


if __name__ == "__main__":
    main()
