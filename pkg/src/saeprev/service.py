"""HTTP service exposing the full workflow as jobs.

Datasets are uploaded once and addressed by content hash; fits run as
asynchronous jobs on a small worker pool (direct estimation inside the
gate/consistency endpoints stays synchronous); results are persisted as
content-addressed artifact directories under the data directory.  Every
response carries the engine version, and fit payloads embed their seeds.
"""

from __future__ import annotations

import dataclasses
import datetime
import logging
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import __version__
from .bundle import FitArtifact, load_artifact, save_artifact
from .data import CovariateError, DatasetError
from .gate import GateBlockedError, GateOverrideRequired
from .graph import GraphError
from .report import build_report, report_json
from .summaries import (
    RidgeSelection,
    SummaryOptions,
    exceedance,
    ridge_data,
    scatter_data,
    summarize,
    tabulate,
    tabulation_csv,
)
from .workflow import DataBundle, load_bundle, run_fit

__all__ = ["create_app"]

log = logging.getLogger("saeprev.service")

ENV_DATA_DIR = "SAE_DATA_DIR"
ENV_PORT = "SAE_PORT"
ENV_SEED_DEFAULT = "SAE_SEED_DEFAULT"


class FitRequest(BaseModel):
    dataset_id: str
    method: str
    level: int
    options: dict = Field(default_factory=dict)
    override: bool = False
    seed: int | None = None


class ReportRequest(BaseModel):
    fit_ids: list[str]
    p0: float | None = None


@dataclasses.dataclass
class Job:
    id: str
    kind: str
    request: dict
    status: str = "queued"          # queued -> running -> done | failed
    result_path: str | None = None
    error: dict | None = None
    created_at: str = ""
    started_at: str | None = None
    finished_at: str | None = None

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["engine_version"] = __version__
        return out


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="milliseconds")


class ServiceState:
    def __init__(self, data_dir: Path, default_seed: int, max_workers: int = 2):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.default_seed = default_seed
        self.bundles: dict[str, DataBundle] = {}
        self.jobs: dict[str, Job] = {}
        self.artifacts: dict[str, FitArtifact] = {}
        self.lock = threading.Lock()
        self.executor = ThreadPoolExecutor(max_workers=max_workers)

    def bundle(self, dataset_id: str) -> DataBundle:
        try:
            return self.bundles[dataset_id]
        except KeyError:
            raise HTTPException(404, detail=f"unknown dataset {dataset_id!r}") from None

    def artifact(self, fit_id: str) -> FitArtifact:
        with self.lock:
            if fit_id in self.artifacts:
                return self.artifacts[fit_id]
            job = self.jobs.get(fit_id)
        if job is None:
            raise HTTPException(404, detail=f"unknown fit {fit_id!r}")
        if job.status == "failed":
            raise HTTPException(409, detail={"status": job.status, "error": job.error})
        if job.status != "done":
            raise HTTPException(409, detail={"status": job.status})
        artifact = load_artifact(job.result_path)
        with self.lock:
            self.artifacts[fit_id] = artifact
        return artifact


def _validation_error(exc: Exception) -> HTTPException:
    return HTTPException(422, detail={"error": type(exc).__name__, "message": str(exc)})


def create_app(
    data_dir=None,
    default_seed: int | None = None,
    max_workers: int = 2,
) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get(ENV_DATA_DIR, "./sae-data"))
    if default_seed is None:
        default_seed = int(os.environ.get(ENV_SEED_DEFAULT, "0"))
    state = ServiceState(data_dir, default_seed, max_workers)
    app = FastAPI(title="saeprev", version=__version__)
    app.state.engine = state

    @app.middleware("http")
    async def stamp_version(request, call_next):
        response = await call_next(request)
        response.headers["X-Engine-Version"] = __version__
        response.headers["X-Default-Seed"] = str(state.default_seed)
        return response

    # -- datasets -----------------------------------------------------------

    @app.post("/datasets")
    async def post_dataset(
        dataset: UploadFile = File(...),
        geometry: UploadFile = File(...),
        covariates: UploadFile | None = File(None),
        edges: UploadFile | None = File(None),
        survey: str = Form(""),
        indicator: str = Form(""),
        reference_estimate: float | None = Form(None),
        covariate_level: int | None = Form(None),
    ):
        try:
            bundle = load_bundle(
                dataset_src=(await dataset.read()).decode("utf-8"),
                geometry_src=(await geometry.read()).decode("utf-8"),
                edges_src=(await edges.read()).decode("utf-8") if edges else None,
                covariates_src=(await covariates.read()).decode("utf-8") if covariates else None,
                covariate_level=covariate_level,
                survey=survey,
                indicator=indicator,
                reference=reference_estimate,
            )
        except (DatasetError, CovariateError, GraphError, ValueError) as exc:
            raise _validation_error(exc) from None
        with state.lock:
            state.bundles[bundle.dataset_id] = bundle
        log.info("dataset loaded id=%s clusters=%d", bundle.dataset_id, len(bundle.dataset))
        return {"dataset_id": bundle.dataset_id, "levels": sorted(bundle.dataset.admin_levels)}

    @app.get("/datasets/{dataset_id}/clusters")
    def get_clusters(dataset_id: str, level: int):
        from .data import cluster_counts

        bundle = state.bundle(dataset_id)
        try:
            counts = cluster_counts(bundle.dataset, level)
        except DatasetError as exc:
            raise _validation_error(exc) from None
        return {
            "level": level,
            "areas": {
                aid: {"n_clusters": c[0], "n_trials": c[1], "n_successes": c[2]}
                for aid, c in counts.items()
            },
        }

    @app.get("/datasets/{dataset_id}/consistency")
    def get_consistency(dataset_id: str):
        return state.bundle(dataset_id).consistency()

    @app.get("/datasets/{dataset_id}/gate")
    def get_gate(dataset_id: str, level: int):
        bundle = state.bundle(dataset_id)
        try:
            return bundle.gate(level).to_dict()
        except DatasetError as exc:
            raise _validation_error(exc) from None

    # -- fits ----------------------------------------------------------------

    def _execute(job: Job):
        with state.lock:
            job.status = "running"
            job.started_at = _now()
        try:
            bundle = state.bundles[job.request["dataset_id"]]
            artifact = run_fit(
                bundle,
                method=job.request["method"],
                level=job.request["level"],
                options=job.request["options"],
                seed=job.request["seed"],
                override=job.request["override"],
            )
            path = state.data_dir / "results" / artifact.fit_id
            save_artifact(artifact, path)
            with state.lock:
                job.result_path = str(path)
                state.artifacts[job.id] = artifact
                job.status = "done"
                job.finished_at = _now()
            log.info("job done id=%s fit=%s", job.id, artifact.fit_id)
        except Exception as exc:  # failures land in the job record
            log.warning("job failed id=%s error=%s", job.id, exc)
            with state.lock:
                job.status = "failed"
                job.error = {"error": type(exc).__name__, "message": str(exc)}
                job.finished_at = _now()

    @app.post("/fits")
    def post_fit(req: FitRequest):
        bundle = state.bundle(req.dataset_id)
        seed = state.default_seed if req.seed is None else req.seed
        try:
            gate = bundle.gate(req.level)
        except DatasetError as exc:
            raise _validation_error(exc) from None
        from .workflow import METHOD_ALIASES

        if req.method not in METHOD_ALIASES:
            raise _validation_error(ValueError(f"unknown method {req.method!r}"))
        canonical = METHOD_ALIASES[req.method]
        verdict = gate.verdict(canonical)
        if verdict == "error_blocked":
            return JSONResponse(
                status_code=403,
                content={
                    "refused": True,
                    "verdict": verdict,
                    "messages": list(gate.messages_for(canonical)),
                    "gate": gate.to_dict(),
                },
            )
        if verdict == "warn_overridable" and not req.override:
            return JSONResponse(
                status_code=403,
                content={
                    "refused": True,
                    "verdict": verdict,
                    "override_required": True,
                    "messages": list(gate.messages_for(canonical)),
                    "gate": gate.to_dict(),
                },
            )
        job = Job(
            id=uuid.uuid4().hex[:12],
            kind=f"fit_{canonical}",
            request={
                "dataset_id": req.dataset_id,
                "method": req.method,
                "level": req.level,
                "options": req.options,
                "seed": seed,
                "override": req.override,
            },
            created_at=_now(),
        )
        with state.lock:
            state.jobs[job.id] = job
        state.executor.submit(_execute, job)
        return {"job_id": job.id, "seed": seed, "engine_version": __version__}

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        with state.lock:
            job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(404, detail=f"unknown job {job_id!r}")
        return job.to_dict()

    # -- results ---------------------------------------------------------------

    @app.get("/fits/{fit_id}/summaries")
    def get_summaries(fit_id: str, point: str = "median", p0: float | None = None):
        artifact = state.artifact(fit_id)
        if artifact.samples is None:
            rows = artifact.summaries
        else:
            try:
                rows = summarize(
                    artifact.posterior(),
                    SummaryOptions(point=point, p0=p0, n_samples=artifact.samples.shape[0]),
                )
            except ValueError as exc:
                raise _validation_error(exc) from None
        return {
            "fit_id": fit_id,
            "method": artifact.method,
            "level": artifact.level,
            "seed": artifact.seed,
            "engine_version": artifact.engine_version,
            "summaries": [dataclasses.asdict(r) for r in rows],
        }

    @app.get("/fits/{fit_id}/exceedance")
    def get_exceedance(fit_id: str, p0: float):
        artifact = state.artifact(fit_id)
        if artifact.samples is None:
            raise HTTPException(400, detail="direct fits carry no posterior; exceedance undefined")
        try:
            probs = exceedance(artifact.posterior(), p0)
        except ValueError as exc:
            raise _validation_error(exc) from None
        return {"fit_id": fit_id, "p0": p0, "seed": artifact.seed, "exceedance": probs}

    @app.get("/fits/{fit_id}/ridge")
    def get_ridge(fit_id: str, selection: str = "top_bottom:5"):
        artifact = state.artifact(fit_id)
        if artifact.samples is None:
            raise HTTPException(400, detail="direct fits carry no posterior; ridge undefined")
        try:
            sel = RidgeSelection.parse(selection)
            block = ridge_data(artifact.posterior(), sel)
        except ValueError as exc:
            raise _validation_error(exc) from None
        return {"fit_id": fit_id, "seed": artifact.seed, **block}

    @app.get("/compare")
    def get_compare(fit_a: str, fit_b: str, stat: str = "point"):
        a = state.artifact(fit_a)
        b = state.artifact(fit_b)
        try:
            data = scatter_data(a.summaries, b.summaries, stat)
        except ValueError as exc:
            raise _validation_error(exc) from None
        return {"fit_a": fit_a, "fit_b": fit_b, **data}

    @app.get("/fits/{fit_id}/tabulation")
    def get_tabulation(fit_id: str):
        artifact = state.artifact(fit_id)
        text = tabulation_csv(tabulate(artifact.summaries))
        return PlainTextResponse(text, media_type="text/csv")

    @app.post("/reports")
    def post_report(req: ReportRequest):
        artifacts = [state.artifact(fid) for fid in req.fit_ids]
        try:
            report = build_report(artifacts, p0=req.p0)
        except ValueError as exc:
            raise _validation_error(exc) from None
        return report

    return app


def main(argv=None):  # convenience for `python -m saeprev.service`
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="run the estimation service")
    parser.add_argument("--port", type=int, default=int(os.environ.get(ENV_PORT, "8756")))
    parser.add_argument("--data-dir", default=os.environ.get(ENV_DATA_DIR, "./sae-data"))
    parser.add_argument("--seed-default", type=int,
                        default=int(os.environ.get(ENV_SEED_DEFAULT, "0")))
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=__import__("sys").stderr,
        level=logging.INFO,
        format="%(asctime)s level=%(levelname)s logger=%(name)s %(message)s",
    )
    app = create_app(args.data_dir, args.seed_default)
    uvicorn.run(app, host="127.0.0.1", port=args.port, log_level="info")


if __name__ == "__main__":
    main()
