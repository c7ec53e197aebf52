"""Fit artifacts: the self-contained result of one fit, shared by the CLI
and the HTTP service and persisted as plain files (JSON + npz), no database.

An artifact carries everything downstream consumers need: provenance
(method, level, options, seed, engine version, dataset hash), the gate
report and consistency check evaluated on the source dataset, per-area
summary rows, the posterior sample matrix for model-based fits, and the
geometry needed to draw maps.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .summaries import AreaSummary

__all__ = ["FitArtifact", "StoredPosterior", "artifact_id", "load_artifact", "save_artifact"]


class StoredPosterior:
    """Sample-backed stand-in for a live posterior.

    Exposes the subset of the posterior interface the summary operations
    need; only the stored (n_samples, seed) combination is available.
    """

    def __init__(self, samples, area_ids, level, method, options, seed,
                 extrapolated, admin1_ancestor):
        self._samples = np.asarray(samples)
        self._samples.setflags(write=False)
        self.area_ids = tuple(area_ids)
        self.level = int(level)
        self.method = method
        self.options = dict(options)
        self.seed = int(seed)
        self.extrapolated = tuple(bool(b) for b in extrapolated)
        self.admin1_ancestor = None if admin1_ancestor is None else tuple(admin1_ancestor)

    def samples(self, n_samples: int | None = None, seed: int | None = None) -> np.ndarray:
        if n_samples not in (None, self._samples.shape[0]) or seed not in (None, self.seed):
            raise ValueError(
                "stored fit carries a fixed sample matrix "
                f"({self._samples.shape[0]} draws, seed {self.seed})"
            )
        return self._samples


@dataclass
class FitArtifact:
    fit_id: str
    dataset_id: str
    method: str                  # direct | area_level | unit_level
    level: int
    options: dict
    seed: int
    engine_version: str
    survey: str
    indicator: str
    gate: dict
    consistency: dict
    summaries: list[AreaSummary]
    area_ids: list[str]
    extrapolated: list[bool]
    admin1_ancestor: list[str] | None
    diagnostics: dict
    samples: np.ndarray | None = None
    geometry: dict | None = None
    warnings: list[str] = field(default_factory=list)

    def posterior(self) -> StoredPosterior:
        if self.samples is None:
            raise ValueError("direct fits carry no posterior samples")
        return StoredPosterior(
            self.samples,
            self.area_ids,
            self.level,
            self.method,
            self.options,
            self.seed,
            self.extrapolated,
            self.admin1_ancestor,
        )

    def summary_payload(self) -> list[dict]:
        return [_summary_to_dict(s) for s in self.summaries]


def artifact_id(dataset_id: str, method: str, level: int, options: dict, seed: int) -> str:
    """Content address of a fit request."""
    key = json.dumps(
        {"dataset": dataset_id, "method": method, "level": level,
         "options": options, "seed": seed},
        sort_keys=True,
    )
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def _summary_to_dict(s: AreaSummary) -> dict:
    d = dataclasses.asdict(s)
    d["flags"] = list(s.flags)
    return d


def _summary_from_dict(d: dict) -> AreaSummary:
    d = dict(d)
    d["flags"] = tuple(d.get("flags", ()))
    return AreaSummary(**d)


def save_artifact(artifact: FitArtifact, directory) -> Path:
    """Write fit.json (+ samples.npz for model fits) into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    payload = {
        "fit_id": artifact.fit_id,
        "dataset_id": artifact.dataset_id,
        "method": artifact.method,
        "level": artifact.level,
        "options": artifact.options,
        "seed": artifact.seed,
        "engine_version": artifact.engine_version,
        "survey": artifact.survey,
        "indicator": artifact.indicator,
        "gate": artifact.gate,
        "consistency": artifact.consistency,
        "summaries": artifact.summary_payload(),
        "area_ids": list(artifact.area_ids),
        "extrapolated": list(artifact.extrapolated),
        "admin1_ancestor": artifact.admin1_ancestor,
        "diagnostics": artifact.diagnostics,
        "warnings": list(artifact.warnings),
        "has_samples": artifact.samples is not None,
    }
    (directory / "fit.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if artifact.samples is not None:
        np.savez_compressed(directory / "samples.npz", samples=artifact.samples)
    if artifact.geometry is not None:
        (directory / "geometry.json").write_text(
            json.dumps(artifact.geometry, sort_keys=True), encoding="utf-8"
        )
    return directory


def load_artifact(directory) -> FitArtifact:
    directory = Path(directory)
    payload = json.loads((directory / "fit.json").read_text(encoding="utf-8"))
    samples = None
    if payload.pop("has_samples", False):
        with np.load(directory / "samples.npz") as npz:
            samples = npz["samples"]
    geometry = None
    geom_path = directory / "geometry.json"
    if geom_path.exists():
        geometry = json.loads(geom_path.read_text(encoding="utf-8"))
    payload["summaries"] = [_summary_from_dict(d) for d in payload["summaries"]]
    return FitArtifact(samples=samples, geometry=geometry, **payload)
