"""Report assembly: one JSON document compiling consistency check, gate
reports, per-model summary tables and plot-ready data for a set of fits on
the same dataset.  Regenerating with the same inputs is byte-identical
except for the timestamp."""

from __future__ import annotations

import datetime
import json
from typing import Sequence

from . import __version__
from .bundle import FitArtifact
from .summaries import RidgeSelection, ridge_data, scatter_data, tabulate

__all__ = ["build_report", "default_ridge_selection", "report_json"]

RIDGE_ALL_MAX_AREAS = 10
SCATTER_STATS = ("point", "cv")


def default_ridge_selection(n_areas: int) -> RidgeSelection:
    if n_areas <= RIDGE_ALL_MAX_AREAS:
        return RidgeSelection("top_bottom", x=n_areas)  # covers all areas
    return RidgeSelection("top_bottom", x=5)


def build_report(
    artifacts: Sequence[FitArtifact],
    p0: float | None = None,
    generated_at: str | None = None,
) -> dict:
    """Compile fits into a self-contained report dictionary.

    All artifacts must come from the same dataset.  `p0` adds exceedance
    blocks for model-based fits.  `generated_at` exists so tests can pin
    the timestamp; every other field is a pure function of the inputs.
    """
    if not artifacts:
        raise ValueError("report needs at least one fit")
    dataset_ids = {a.dataset_id for a in artifacts}
    if len(dataset_ids) != 1:
        raise ValueError(f"fits come from different datasets: {sorted(dataset_ids)}")
    if generated_at is None:
        generated_at = (
            datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        )

    models = []
    map_stats = []
    ridge_blocks = []
    for a in sorted(artifacts, key=lambda a: a.fit_id):
        models.append(
            {
                "fit_id": a.fit_id,
                "method": a.method,
                "level": a.level,
                "options": a.options,
                "seed": a.seed,
                "warnings": list(a.diagnostics.get("warnings", [])),
                "summary_table": tabulate(a.summaries),
            }
        )
        stats: dict = {"point": {}, "ci_width": {}, "cv": {}}
        for s in a.summaries:
            stats["point"][s.area_id] = s.point
            stats["ci_width"][s.area_id] = s.ci_width
            stats["cv"][s.area_id] = s.cv
        flags = {s.area_id: list(s.flags) for s in a.summaries if s.flags}
        entry = {
            "fit_id": a.fit_id,
            "method": a.method,
            "level": a.level,
            "stats": stats,
            "flags": flags,
        }
        if p0 is not None and a.samples is not None:
            from .summaries import exceedance

            entry["stats"]["exceedance"] = exceedance(a.posterior(), p0)
            entry["exceedance_p0"] = p0
        map_stats.append(entry)
        if a.samples is not None:
            selection = default_ridge_selection(len(a.area_ids))
            ridge_blocks.append(
                {
                    "fit_id": a.fit_id,
                    "method": a.method,
                    "level": a.level,
                    "ridge": ridge_data(a.posterior(), selection),
                }
            )

    scatter_blocks = []
    arts = sorted(artifacts, key=lambda a: a.fit_id)
    for i, a in enumerate(arts):
        for b in arts[i + 1 :]:
            if a.level != b.level:
                continue
            for stat in SCATTER_STATS:
                scatter_blocks.append(
                    {
                        "fit_a": a.fit_id,
                        "fit_b": b.fit_id,
                        "level": a.level,
                        "data": scatter_data(a.summaries, b.summaries, stat),
                    }
                )

    first = artifacts[0]
    return {
        "engine_version": __version__,
        "generated_at": generated_at,
        "metadata": {
            "dataset_id": first.dataset_id,
            "survey": first.survey,
            "indicator": first.indicator,
            "seeds": {a.fit_id: a.seed for a in artifacts},
        },
        "consistency": first.consistency,
        "gates": _unique_gates(artifacts),
        "models": models,
        "plots": {
            "map_stats": map_stats,
            "scatter": scatter_blocks,
            "ridge": ridge_blocks,
        },
    }


def _unique_gates(artifacts: Sequence[FitArtifact]) -> list[dict]:
    seen = {}
    for a in artifacts:
        seen[a.gate["level"]] = a.gate
    return [seen[lv] for lv in sorted(seen)]


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
