"""Shared orchestration behind the CLI and the HTTP service.

One load path for input bundles and one fit path for all three methods, so
both interfaces produce byte-identical numbers for identical inputs and
seeds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from . import __version__
from .area_model import AreaModelOptions, fit_area_model
from .bundle import FitArtifact, artifact_id
from .data import (
    AnalysisDataset,
    CovariateTable,
    DatasetMetadata,
    load_covariates,
    load_dataset,
)
from .direct import DirectEstimates, design_variance, national_consistency_check
from .gate import (
    ALLOW,
    BLOCK,
    METHOD_AREA,
    METHOD_DIRECT,
    METHOD_UNIT,
    GateBlockedError,
    GateOverrideRequired,
    GateReport,
    evaluate_gate,
)
from .graph import AreaGraph, build_graph, load_geometry
from .summaries import SummaryOptions, summarize
from .unit_model import UnitModelOptions, fit_unit_model

__all__ = ["DataBundle", "load_bundle", "run_fit", "METHOD_ALIASES"]

METHOD_ALIASES = {
    "direct": METHOD_DIRECT,
    "area": METHOD_AREA,
    "area_level": METHOD_AREA,
    "unit": METHOD_UNIT,
    "unit_level": METHOD_UNIT,
}


@dataclass
class DataBundle:
    dataset_id: str
    dataset: AnalysisDataset
    graph: AreaGraph
    geometry: dict | None
    covariates: CovariateTable | None
    survey: str
    indicator: str

    def direct_estimates(self, level: int) -> DirectEstimates:
        return design_variance(self.dataset, level)

    def gate(self, level: int) -> GateReport:
        return evaluate_gate(self.direct_estimates(level), level)

    def consistency(self, tolerance: float = 0.005) -> dict:
        return national_consistency_check(self.dataset, tolerance)


def _read_text(source) -> str:
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    s = str(source)
    if "\n" in s or s.lstrip()[:1] in ("{", "["):
        return s
    with open(s, "r", encoding="utf-8") as fh:
        return fh.read()


def load_bundle(
    dataset_src,
    geometry_src,
    edges_src=None,
    covariates_src=None,
    covariate_level: int | None = None,
    survey: str = "",
    indicator: str = "",
    reference: float | None = None,
) -> DataBundle:
    """Read/validate the dataset, geometry (and optional edges/covariates)
    into one immutable bundle keyed by a content hash."""
    geometry = load_geometry(_read_text(geometry_src))
    edges = None
    if edges_src is not None:
        edges = []
        for lineno, line in enumerate(_read_text(edges_src).splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ValueError(f"edge file line {lineno}: expected 'level, id_a, id_b'")
            edges.append((int(parts[0]), parts[1], parts[2]))
    graph = build_graph(geometry=geometry, edges=edges)

    dataset_text = _read_text(dataset_src)
    meta = DatasetMetadata(
        survey=survey, indicator=indicator, reference_national_estimate=reference
    )
    dataset = load_dataset(dataset_text, graph, meta)

    covariates = None
    if covariates_src is not None:
        cov_text = _read_text(covariates_src)
        if covariate_level is None:
            covariate_level = _infer_covariate_level(cov_text, graph)
        covariates = load_covariates(cov_text, covariate_level, graph)

    digest = hashlib.sha256()
    digest.update(dataset_text.encode("utf-8"))
    digest.update(json.dumps(geometry, sort_keys=True).encode("utf-8"))
    return DataBundle(
        dataset_id=digest.hexdigest()[:12],
        dataset=dataset,
        graph=graph,
        geometry=geometry,
        covariates=covariates,
        survey=survey,
        indicator=indicator,
    )


def _infer_covariate_level(cov_text: str, graph: AreaGraph) -> int:
    import csv
    import io

    reader = csv.DictReader(io.StringIO(cov_text))
    ids = {(row.get("area_id") or "").strip() for row in reader}
    for level in graph.levels:
        if ids == set(graph.area_ids(level)):
            return level
    raise ValueError("covariate areas do not match any admin level exactly")


def run_fit(
    bundle: DataBundle,
    method: str,
    level: int,
    options: dict | None = None,
    seed: int = 0,
    override: bool = False,
    n_samples: int = 4000,
) -> FitArtifact:
    """Gate-check and run one fit, returning a self-contained artifact.

    Raises GateBlockedError for a blocked method and GateOverrideRequired
    for an un-overridden warning; the messages carried by both are the
    verbatim gate messages.
    """
    options = dict(options or {})
    try:
        canonical = METHOD_ALIASES[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}") from None

    direct = bundle.direct_estimates(level)
    report = evaluate_gate(direct, level)
    verdict = report.verdict(canonical)
    if verdict == BLOCK:
        raise GateBlockedError(report, canonical)
    if verdict != ALLOW and not override:
        raise GateOverrideRequired(report, canonical)

    fid = artifact_id(bundle.dataset_id, canonical, level, options, seed)
    common = dict(
        fit_id=fid,
        dataset_id=bundle.dataset_id,
        level=level,
        seed=seed,
        engine_version=__version__,
        survey=bundle.survey,
        indicator=bundle.indicator,
        gate=report.to_dict(),
        consistency=bundle.consistency(),
        geometry=bundle.geometry,
    )

    if canonical == METHOD_DIRECT:
        rows = summarize(direct)
        return FitArtifact(
            method=METHOD_DIRECT,
            options=options,
            summaries=rows,
            area_ids=list(bundle.graph.area_ids(level)),
            extrapolated=[a.flag != "ok" for a in direct.areas.values()],
            admin1_ancestor=[
                bundle.graph.ancestor_at(aid, min(1, level))
                for aid in bundle.graph.area_ids(level)
            ],
            diagnostics={"notes": _direct_notes(direct)},
            samples=None,
            **common,
        )

    covariate_columns = tuple(options.get("covariates", ()))
    if canonical == METHOD_AREA:
        opts = AreaModelOptions(
            level=level,
            use_covariates=bool(covariate_columns),
            covariate_columns=covariate_columns,
            seed=seed,
        )
        result = fit_area_model(direct, bundle.graph, bundle.covariates, opts)
    else:
        opts = UnitModelOptions(
            level=level,
            nested=bool(options.get("nested", False)),
            use_covariates=bool(covariate_columns),
            covariate_columns=covariate_columns,
            seed=seed,
        )
        result = fit_unit_model(bundle.dataset, bundle.graph, bundle.covariates, opts)

    rows = summarize(result, SummaryOptions(n_samples=n_samples))
    return FitArtifact(
        method=result.method,
        options=result.options,
        summaries=rows,
        area_ids=list(result.area_ids),
        extrapolated=list(result.extrapolated),
        admin1_ancestor=list(result.admin1_ancestor or ()) or None,
        diagnostics=_json_safe(result.diagnostics),
        samples=result.samples(n_samples=n_samples),
        **common,
    )


def _direct_notes(direct: DirectEstimates) -> list[str]:
    notes = []
    for aid, a in direct.areas.items():
        notes.extend(f"{aid}: {note}" for note in a.notes)
    return notes


def _json_safe(obj):
    import numpy as np

    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
