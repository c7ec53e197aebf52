"""Batch command-line interface.

Subcommands mirror the workflow: `check` validates and gates a dataset,
`fit` runs one method/level into a result bundle, `summarize` and `report`
turn bundles into the delimited tabulation plus rendered figures, `simulate`
writes a synthetic design, and `serve` starts the HTTP service.  Failures
print a machine-readable JSON error block to standard error and exit
nonzero; all randomness flows from --seed (default SAE_SEED_DEFAULT).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .bundle import load_artifact, save_artifact
from .data import CovariateError, DatasetError, cluster_counts, dataset_to_csv
from .gate import GateBlockedError, GateOverrideRequired
from .graph import GraphError
from .report import build_report, default_ridge_selection, report_json
from .summaries import (
    RidgeSelection,
    SummaryOptions,
    exceedance,
    ridge_data,
    summarize,
    tabulate,
    tabulation_csv,
)
from .synthetic import generate_synthetic, parse_config_file, synthetic_geometry
from .workflow import load_bundle, run_fit

log = logging.getLogger("saeprev.cli")

ENV_SEED_DEFAULT = "SAE_SEED_DEFAULT"


def _geometry_lookup(geometry: dict | None) -> dict:
    out = {}
    for feat in (geometry or {}).get("features", []):
        props = feat.get("properties") or {}
        if feat.get("geometry"):
            out[str(props.get("id"))] = feat["geometry"]
    return out


def _fail(exc: Exception) -> int:
    block = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    if isinstance(exc, (GateBlockedError, GateOverrideRequired)):
        block["error"]["messages"] = list(exc.report.messages_for(exc.method))
        block["error"]["gate"] = exc.report.to_dict()
    print(json.dumps(block, indent=2, sort_keys=True), file=sys.stderr)
    return 1


def _add_input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True, help="cluster CSV file")
    p.add_argument("--geometry", required=True, help="area feature-collection JSON")
    p.add_argument("--edges", help="optional explicit edge list (level, id_a, id_b per line)")
    p.add_argument("--covariates", help="optional area-covariate CSV")
    p.add_argument("--covariate-level", type=int, help="admin level of the covariate file")
    p.add_argument("--survey", default="", help="survey label")
    p.add_argument("--indicator", default="", help="indicator label")
    p.add_argument("--reference", type=float, help="official national estimate in [0,1]")


def _bundle_from_args(args) -> "DataBundle":
    return load_bundle(
        dataset_src=args.dataset,
        geometry_src=args.geometry,
        edges_src=args.edges,
        covariates_src=args.covariates,
        covariate_level=args.covariate_level,
        survey=args.survey,
        indicator=args.indicator,
        reference=args.reference,
    )


def cmd_check(args) -> int:
    bundle = _bundle_from_args(args)
    levels = args.level or sorted(lv for lv in bundle.dataset.admin_levels if lv >= 1)
    out = {
        "dataset_id": bundle.dataset_id,
        "engine_version": __version__,
        "n_clusters": len(bundle.dataset),
        "consistency": bundle.consistency(),
        "gates": [],
    }
    for lv in levels:
        gate = bundle.gate(lv)
        counts = cluster_counts(bundle.dataset, lv)
        block = gate.to_dict()
        block["cluster_totals"] = {
            "clusters": sum(c[0] for c in counts.values()),
            "trials": sum(c[1] for c in counts.values()),
            "successes": sum(c[2] for c in counts.values()),
        }
        out["gates"].append(block)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_fit(args) -> int:
    bundle = _bundle_from_args(args)
    options: dict = {}
    if args.nested:
        options["nested"] = True
    if args.covariate_columns:
        options["covariates"] = [c.strip() for c in args.covariate_columns.split(",")]
    artifact = run_fit(
        bundle,
        method=args.method,
        level=args.level,
        options=options,
        seed=args.seed,
        override=args.override,
    )
    outdir = Path(args.out)
    save_artifact(artifact, outdir)
    (outdir / "tabulation.csv").write_text(
        tabulation_csv(tabulate(artifact.summaries)), encoding="utf-8"
    )
    log.info("fit written id=%s method=%s level=%d", artifact.fit_id, artifact.method, args.level)
    print(json.dumps({
        "fit_id": artifact.fit_id,
        "method": artifact.method,
        "level": artifact.level,
        "seed": artifact.seed,
        "out": str(outdir),
    }, indent=2, sort_keys=True))
    return 0


def cmd_summarize(args) -> int:
    artifact = load_artifact(args.fit)
    if artifact.samples is None:
        rows = artifact.summaries
    else:
        rows = summarize(
            artifact.posterior(),
            SummaryOptions(point=args.point, p0=args.p0,
                           n_samples=artifact.samples.shape[0]),
        )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "tabulation.csv").write_text(tabulation_csv(tabulate(rows)), encoding="utf-8")

    plot_data: dict = {
        "fit_id": artifact.fit_id,
        "method": artifact.method,
        "level": artifact.level,
        "map_stats": {
            "point": {r.area_id: r.point for r in rows},
            "ci_width": {r.area_id: r.ci_width for r in rows},
            "cv": {r.area_id: r.cv for r in rows},
        },
    }
    if artifact.samples is not None:
        if args.p0 is not None:
            plot_data["map_stats"]["exceedance"] = exceedance(artifact.posterior(), args.p0)
        selection = (
            RidgeSelection.parse(args.ridge) if args.ridge
            else default_ridge_selection(len(artifact.area_ids))
        )
        plot_data["ridge"] = ridge_data(artifact.posterior(), selection)
    (outdir / "plot_data.json").write_text(
        json.dumps(plot_data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    from .figures import render_map, render_ridge

    geometry_by_area = _geometry_lookup(artifact.geometry)
    flags = {r.area_id: list(r.flags) for r in rows if r.flags}
    figures = []
    for stat, values in plot_data["map_stats"].items():
        if all(v is None for v in values.values()):
            continue
        figures.append(str(render_map(
            values, geometry_by_area, stat, outdir / f"map_{stat}.png", flags=flags,
            title=f"{artifact.method} level {artifact.level}: {stat}",
        )))
    if "ridge" in plot_data:
        figures.append(str(render_ridge(
            {"ridge": plot_data["ridge"], "method": artifact.method, "level": artifact.level},
            outdir / "ridge.png",
        )))
    print(json.dumps({"out": str(outdir), "figures": figures}, indent=2, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    artifacts = [load_artifact(d) for d in args.fit]
    report = build_report(artifacts, p0=args.p0)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "report.json").write_text(report_json(report), encoding="utf-8")
    rows = []
    for model in report["models"]:
        rows.extend(model["summary_table"])
    (outdir / "tabulation.csv").write_text(tabulation_csv(rows), encoding="utf-8")

    from .figures import render_report_figures

    figures = render_report_figures(report, artifacts[0].geometry, outdir)
    print(json.dumps({
        "out": str(outdir),
        "report": str(outdir / "report.json"),
        "figures": [str(f) for f in figures],
    }, indent=2, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    cfg = parse_config_file(args.config)
    if args.seed is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, seed=args.seed)
    geometry = synthetic_geometry(cfg.n_admin1, args.admin2_per_admin1)
    from .graph import build_graph

    graph = build_graph(geometry=geometry)
    ds = generate_synthetic(cfg, graph)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "dataset.csv").write_text(dataset_to_csv(ds), encoding="utf-8")
    (outdir / "geometry.geojson").write_text(
        json.dumps(geometry, sort_keys=True), encoding="utf-8"
    )
    print(json.dumps({
        "out": str(outdir),
        "clusters": len(ds),
        "households": int(sum(r.n for r in ds.records)),
        "seed": cfg.seed,
    }, indent=2, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir, args.seed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saeprev",
        description="subnational prevalence estimation from stratified cluster surveys",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    default_seed = int(os.environ.get(ENV_SEED_DEFAULT, "0"))

    p = sub.add_parser("check", help="validate a dataset, run the gate and consistency check")
    _add_input_args(p)
    p.add_argument("--level", type=int, action="append", help="admin level(s) to gate")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("fit", help="run one estimation method at one level")
    _add_input_args(p)
    p.add_argument("--method", required=True, choices=["direct", "area", "unit"])
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--override", action="store_true", help="proceed past overridable warnings")
    p.add_argument("--nested", action="store_true", help="admin-1 fixed effects (unit, level>=2)")
    p.add_argument("--covariate-columns", help="comma-separated covariate names to include")
    p.add_argument("--seed", type=int, default=default_seed)
    p.add_argument("--out", required=True, help="result bundle directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("summarize", help="tabulation, plot data and figures for one fit")
    p.add_argument("--fit", required=True, help="result bundle directory")
    p.add_argument("--point", choices=["median", "mean"], default="median")
    p.add_argument("--p0", type=float, help="exceedance threshold")
    p.add_argument("--ridge", help="ridge selection: all_level1 | within:<id> | top_bottom:<x>")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("report", help="compile fits into a report with figures")
    p.add_argument("--fit", action="append", required=True, help="result bundle directory (repeatable)")
    p.add_argument("--p0", type=float, help="exceedance threshold")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="write a synthetic stratified design")
    p.add_argument("--config", required=True, help="key = value design config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--admin2-per-admin1", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("SAE_PORT", "8756")))
    p.add_argument("--data-dir", default=os.environ.get("SAE_DATA_DIR", "./sae-data"))
    p.add_argument("--seed", type=int, default=default_seed)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO,
        format="%(asctime)s level=%(levelname)s logger=%(name)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetError, CovariateError, GraphError, GateBlockedError,
            GateOverrideRequired, ValueError, OSError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
