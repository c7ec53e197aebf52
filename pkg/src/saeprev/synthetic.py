"""Synthetic stratified two-stage designs for testing and benchmarks.

Mirrors the common national survey layout: strata are admin-1 crossed with
urban/rural, a fixed number of clusters is allocated across strata, and a
fixed number of households is drawn per cluster.  Everything is a pure
function of the config seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .data import AnalysisDataset, ClusterRecord, DatasetError, DatasetMetadata
from .graph import Area, AreaGraph, build_graph

__all__ = [
    "SyntheticDesignConfig",
    "generate_synthetic",
    "parse_config_file",
    "synthetic_geometry",
    "synthetic_graph",
]

URBAN_SHARE = 0.4  # urban clusters are oversampled relative to population


@dataclass(frozen=True)
class SyntheticDesignConfig:
    n_admin1: int = 37
    strata_per_admin1: int = 2
    clusters_total: int = 1400
    households_per_cluster: int = 30
    true_prevalence_field: Mapping = field(
        default_factory=lambda: {"kind": "constant", "value": 0.3}
    )
    seed: int = 0

    def __post_init__(self):
        for name in ("n_admin1", "strata_per_admin1", "clusters_total", "households_per_cluster"):
            if getattr(self, name) <= 0:
                raise DatasetError(f"{name} must be positive")
        if self.strata_per_admin1 != 2:
            raise DatasetError("strata_per_admin1 must be 2 (urban/rural)")
        kind = self.true_prevalence_field.get("kind")
        if kind not in ("constant", "gradient", "table"):
            raise DatasetError(f"unknown prevalence field kind {kind!r}")


def _grid_shape(n: int) -> tuple[int, int]:
    rows = int(np.floor(np.sqrt(n)))
    while n % rows:
        rows -= 1
    return rows, n // rows


def synthetic_graph(
    n_admin1: int, admin2_per_admin1: int = 0, national_id: str = "NAT"
) -> AreaGraph:
    """Planar grid hierarchy: admin-1 cells on a grid, optionally subdivided
    into admin-2 sub-cells.  Area ids follow row-major grid order, so ordinal
    position tracks the north-south axis."""
    geometry = synthetic_geometry(n_admin1, admin2_per_admin1, national_id)
    return build_graph(geometry=geometry)


def synthetic_geometry(
    n_admin1: int, admin2_per_admin1: int = 0, national_id: str = "NAT"
) -> dict:
    rows, cols = _grid_shape(n_admin1)
    features = [
        {
            "type": "Feature",
            "properties": {"id": national_id, "name": "National", "level": 0, "parent_id": None},
            "geometry": _cell_polygon(0.0, 0.0, float(cols), float(rows)),
        }
    ]
    for k in range(n_admin1):
        r, c = divmod(k, cols)
        a1 = f"A1_{k + 1:02d}"
        features.append(
            {
                "type": "Feature",
                "properties": {"id": a1, "name": f"Region {k + 1}", "level": 1, "parent_id": national_id},
                "geometry": _cell_polygon(float(c), float(r), 1.0, 1.0),
            }
        )
        if admin2_per_admin1:
            srows, scols = _grid_shape(admin2_per_admin1)
            for j in range(admin2_per_admin1):
                sr, sc = divmod(j, scols)
                a2 = f"A2_{k + 1:02d}_{j + 1:02d}"
                features.append(
                    {
                        "type": "Feature",
                        "properties": {
                            "id": a2,
                            "name": f"District {k + 1}.{j + 1}",
                            "level": 2,
                            "parent_id": a1,
                        },
                        "geometry": _cell_polygon(
                            c + sc / scols, r + sr / srows, 1.0 / scols, 1.0 / srows
                        ),
                    }
                )
    return {"type": "FeatureCollection", "features": features}


def _cell_polygon(x: float, y: float, w: float, h: float) -> dict:
    # rounding keeps shared cell corners bit-identical across features
    def pt(a: float, b: float) -> list[float]:
        return [round(a, 9), round(b, 9)]

    return {
        "type": "Polygon",
        "coordinates": [[pt(x, y), pt(x + w, y), pt(x + w, y + h), pt(x, y + h), pt(x, y)]],
    }


def prevalence_for_areas(field_spec: Mapping, area_ids: tuple[str, ...]) -> np.ndarray:
    """Evaluate a prevalence field spec over an ordered set of areas."""
    kind = field_spec.get("kind")
    n = len(area_ids)
    if kind == "constant":
        return np.full(n, float(field_spec["value"]))
    if kind == "gradient":
        lo, hi = float(field_spec["low"]), float(field_spec["high"])
        pos = np.arange(n) / max(n - 1, 1)
        return lo + (hi - lo) * pos
    if kind == "table":
        values = field_spec["values"]
        try:
            return np.array([float(values[aid]) for aid in area_ids])
        except KeyError as exc:
            raise DatasetError(f"prevalence table missing area {exc}") from None
    raise DatasetError(f"unknown prevalence field kind {kind!r}")


def generate_synthetic(cfg: SyntheticDesignConfig, graph: AreaGraph) -> AnalysisDataset:
    """Draw a full synthetic dataset; byte-identical for a fixed seed.

    Clusters are allocated to admin1 x urban/rural strata (urban share fixed
    at 0.4, remainders resolved deterministically), assigned uniformly to a
    child area at the finest graph level, given lognormal design weights with
    urban clusters downweighted, and binomial success counts under the
    configured prevalence field.
    """
    admin1_ids = graph.area_ids(1)
    if len(admin1_ids) < cfg.n_admin1:
        raise DatasetError(
            f"graph has {len(admin1_ids)} admin-1 areas, config needs {cfg.n_admin1}"
        )
    admin1_ids = admin1_ids[: cfg.n_admin1]
    fine_level = max(graph.levels)
    fine_ids = graph.area_ids(fine_level)
    prev = prevalence_for_areas(cfg.true_prevalence_field, fine_ids)
    if np.any((prev < 0) | (prev > 1)):
        raise DatasetError("prevalence field produced values outside [0,1]")
    prev_by_area = dict(zip(fine_ids, prev))

    rng = np.random.default_rng(cfg.seed)

    # largest-remainder allocation of clusters to strata, then stochastic
    # jitter is avoided entirely: allocation is a pure function of the config
    strata = [(a1, kind) for a1 in admin1_ids for kind in ("urban", "rural")]
    shares = np.array(
        [URBAN_SHARE if kind == "urban" else 1.0 - URBAN_SHARE for _, kind in strata]
    )
    shares = shares / shares.sum()
    quota = shares * cfg.clusters_total
    alloc = np.floor(quota).astype(int)
    remainder = cfg.clusters_total - int(alloc.sum())
    order = np.argsort(-(quota - alloc), kind="stable")
    alloc[order[:remainder]] += 1

    children_cache: dict[str, tuple[str, ...]] = {}

    def fine_children(a1: str) -> tuple[str, ...]:
        if a1 not in children_cache:
            ids = (a1,)
            lv = 1
            while lv < fine_level:
                ids = tuple(c for parent in ids for c in graph.children(parent))
                lv += 1
            children_cache[a1] = ids
        return children_cache[a1]

    records = []
    cluster_no = 0
    for (a1, kind), m in zip(strata, alloc):
        pool = fine_children(a1)
        log_mu = np.log(0.8) if kind == "urban" else np.log(1.15)
        for _ in range(m):
            cluster_no += 1
            area = pool[int(rng.integers(len(pool)))]
            weight = float(np.exp(rng.normal(log_mu, 0.15)))
            n = cfg.households_per_cluster
            y = int(rng.binomial(n, prev_by_area[area]))
            ids = {0: graph.root.id}
            for lv in range(1, fine_level + 1):
                ids[lv] = graph.ancestor_at(area, lv)
            records.append(
                ClusterRecord(
                    cluster_id=f"C{cluster_no:05d}",
                    stratum_id=f"{a1}:{kind}",
                    area_id_by_level=ids,
                    weight=weight,
                    n=n,
                    y=y,
                )
            )
    meta = DatasetMetadata(survey=f"synthetic-seed{cfg.seed}", indicator="synthetic")
    return AnalysisDataset(records, graph, meta)


def parse_config_file(source) -> SyntheticDesignConfig:
    """Parse a flat `key = value` config file into a design config.

    Recognized keys: n_admin1, strata_per_admin1, clusters_total,
    households_per_cluster, seed, prevalence_kind and the matching
    prevalence_value / prevalence_low / prevalence_high.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        s = str(source)
        text = s if "\n" in s or "=" in s else open(s, "r", encoding="utf-8").read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    kv: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetError(f"config line {lineno}: expected key = value, got {line!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        kv[key] = val

    def intval(key: str, default: int) -> int:
        if key not in kv:
            return default
        try:
            return int(kv[key])
        except ValueError:
            raise DatasetError(f"config key {key!r} must be an integer") from None

    kind = kv.get("prevalence_kind", "constant")
    if kind == "constant":
        fieldspec: dict = {"kind": "constant", "value": float(kv.get("prevalence_value", "0.3"))}
    elif kind == "gradient":
        fieldspec = {
            "kind": "gradient",
            "low": float(kv.get("prevalence_low", "0.1")),
            "high": float(kv.get("prevalence_high", "0.5")),
        }
    else:
        raise DatasetError(f"config prevalence_kind {kind!r} not supported in files")

    return SyntheticDesignConfig(
        n_admin1=intval("n_admin1", 37),
        strata_per_admin1=intval("strata_per_admin1", 2),
        clusters_total=intval("clusters_total", 1400),
        households_per_cluster=intval("households_per_cluster", 30),
        true_prevalence_field=fieldspec,
        seed=intval("seed", 0),
    )
