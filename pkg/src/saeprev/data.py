"""Cluster-level analysis datasets and area-level covariate tables.

A dataset is one row per sampled cluster: stratum, design weight, trials n
and successes y, plus the area ids that locate the cluster at every admin
level.  Validation is total -- loading either returns a dataset satisfying
all invariants or raises a diagnostic naming the first offending row/field.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .graph import AreaGraph

__all__ = [
    "AnalysisDataset",
    "ClusterRecord",
    "CovariateError",
    "CovariateTable",
    "DatasetError",
    "DatasetMetadata",
    "cluster_counts",
    "dataset_to_csv",
    "load_covariates",
    "load_dataset",
]

REQUIRED_COLUMNS = ("cluster_id", "stratum_id", "admin1_id", "weight", "n", "y")
OPTIONAL_AREA_COLUMNS = {"admin2_id": 2, "admin3_id": 3}


class DatasetError(ValueError):
    """Dataset file or record violates the data contract."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(f"row {row}: {message}" if row is not None else message)


class CovariateError(ValueError):
    """Covariate file violates the covariate-table contract."""


@dataclass(frozen=True)
class ClusterRecord:
    cluster_id: str
    stratum_id: str
    area_id_by_level: Mapping[int, str]
    weight: float
    n: int
    y: int

    def __post_init__(self):
        if self.weight <= 0 or not np.isfinite(self.weight):
            raise DatasetError(f"weight must be positive, got {self.weight}")
        if self.n < 0:
            raise DatasetError(f"trials must be nonnegative, got {self.n}")
        if not 0 <= self.y <= self.n:
            raise DatasetError(f"successes exceed trials (y={self.y}, n={self.n})")
        levels = sorted(self.area_id_by_level)
        if levels != list(range(len(levels))):
            raise DatasetError(f"area levels must form a prefix 0..k, got {levels}")
        object.__setattr__(
            self, "area_id_by_level", MappingProxyType(dict(self.area_id_by_level))
        )


@dataclass(frozen=True)
class DatasetMetadata:
    survey: str = ""
    indicator: str = ""
    reference_national_estimate: float | None = None

    def __post_init__(self):
        ref = self.reference_national_estimate
        if ref is not None and not 0.0 <= ref <= 1.0:
            raise DatasetError(f"reference estimate must be in [0,1], got {ref}")


class AnalysisDataset:
    """Validated, immutable collection of cluster records bound to a graph."""

    def __init__(
        self,
        records: Sequence[ClusterRecord],
        graph: AreaGraph,
        metadata: DatasetMetadata | None = None,
    ):
        records = tuple(records)
        if not records:
            raise DatasetError("dataset has no records")
        seen: set[str] = set()
        levels = set(records[0].area_id_by_level)
        for k, rec in enumerate(records):
            if rec.cluster_id in seen:
                raise DatasetError(f"duplicate cluster_id {rec.cluster_id!r}", row=k + 1)
            seen.add(rec.cluster_id)
            if set(rec.area_id_by_level) != levels:
                raise DatasetError(
                    f"cluster {rec.cluster_id!r} has levels "
                    f"{sorted(rec.area_id_by_level)}, expected {sorted(levels)}",
                    row=k + 1,
                )
            for lv in sorted(levels):
                aid = rec.area_id_by_level[lv]
                if not graph.has_area(aid, level=lv):
                    raise DatasetError(
                        f"unknown area {aid!r} at level {lv}", row=k + 1
                    )
                if lv > 0:
                    parent = rec.area_id_by_level[lv - 1]
                    if graph.area(aid).parent_id != parent:
                        raise DatasetError(
                            f"area {aid!r} is not a child of {parent!r}", row=k + 1
                        )
        self._records = records
        self._graph = graph
        self._levels = frozenset(levels)
        self._metadata = metadata or DatasetMetadata()

    @property
    def records(self) -> tuple[ClusterRecord, ...]:
        return self._records

    @property
    def graph(self) -> AreaGraph:
        return self._graph

    @property
    def admin_levels(self) -> frozenset[int]:
        return self._levels

    @property
    def metadata(self) -> DatasetMetadata:
        return self._metadata

    def __len__(self) -> int:
        return len(self._records)

    def require_level(self, level: int) -> None:
        if level not in self._levels:
            raise DatasetError(
                f"level {level} not available (have {sorted(self._levels)})"
            )

    def arrays(self, level: int):
        """Vector view (area_index, weight, n, y) at a level, in record order."""
        self.require_level(level)
        idx = self._graph.index(level)
        area = np.array(
            [idx[r.area_id_by_level[level]] for r in self._records], dtype=np.intp
        )
        w = np.array([r.weight for r in self._records])
        n = np.array([r.n for r in self._records], dtype=float)
        y = np.array([r.y for r in self._records], dtype=float)
        return area, w, n, y


def _parse_row(row: Mapping[str, str], k: int, levels: list[int], root_id: str) -> ClusterRecord:
    def get(col: str) -> str:
        val = (row.get(col) or "").strip()
        if not val:
            raise DatasetError(f"missing value for {col!r}", row=k)
        return val

    try:
        weight = float(get("weight"))
    except ValueError:
        raise DatasetError(f"weight is not a number: {row.get('weight')!r}", row=k) from None
    try:
        n = int(get("n"))
        y = int(get("y"))
    except ValueError:
        raise DatasetError(
            f"n/y must be integers, got n={row.get('n')!r} y={row.get('y')!r}", row=k
        ) from None

    area_ids = {0: root_id}
    for lv in levels:
        if lv == 0:
            continue
        col = f"admin{lv}_id"
        area_ids[lv] = get(col)

    try:
        return ClusterRecord(
            cluster_id=get("cluster_id"),
            stratum_id=get("stratum_id"),
            area_id_by_level=area_ids,
            weight=weight,
            n=n,
            y=y,
        )
    except DatasetError as exc:
        raise DatasetError(str(exc), row=k) from None


def load_dataset(
    source,
    graph: AreaGraph,
    metadata: DatasetMetadata | None = None,
) -> AnalysisDataset:
    """Load a delimited cluster file against a bound graph.

    `source` is a path, a file object, or CSV text.  Required columns:
    cluster_id, stratum_id, admin1_id, weight, n, y; optional admin2_id,
    admin3_id extend the available levels.  Row order is preserved.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        s = str(source)
        if "\n" in s or "," in s:
            text = s
        else:
            with open(s, "r", encoding="utf-8", newline="") as fh:
                text = fh.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise DatasetError(f"missing required columns {missing} in header {header}")

    levels = [0, 1]
    for col, lv in sorted(OPTIONAL_AREA_COLUMNS.items(), key=lambda kv: kv[1]):
        if col in header:
            if lv - 1 not in levels:
                raise DatasetError(f"column {col!r} present without admin{lv-1}_id")
            levels.append(lv)

    root_id = graph.root.id
    records = []
    for k, row in enumerate(reader, start=1):
        if row.get(None):
            raise DatasetError("extra unnamed columns", row=k)
        records.append(_parse_row(row, k, levels, root_id))
    if not records:
        raise DatasetError("dataset file has no data rows")
    return AnalysisDataset(records, graph, metadata)


def dataset_to_csv(ds: AnalysisDataset) -> str:
    """Serialize a dataset back to the delimited external format."""
    levels = sorted(lv for lv in ds.admin_levels if lv >= 1)
    header = ["cluster_id", "stratum_id", "admin1_id", "weight", "n", "y"]
    header += [f"admin{lv}_id" for lv in levels if lv >= 2]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for rec in ds.records:
        row = [
            rec.cluster_id,
            rec.stratum_id,
            rec.area_id_by_level[1],
            repr(rec.weight),
            rec.n,
            rec.y,
        ]
        row += [rec.area_id_by_level[lv] for lv in levels if lv >= 2]
        writer.writerow(row)
    return buf.getvalue()


def cluster_counts(ds: AnalysisDataset, level: int) -> dict[str, tuple[int, int, int]]:
    """Per-area (n_clusters, n_trials, n_successes) at a level.

    Every graph area at the level appears; areas with no rows get (0, 0, 0).
    """
    ds.require_level(level)
    counts = {aid: [0, 0, 0] for aid in ds.graph.area_ids(level)}
    for rec in ds.records:
        c = counts[rec.area_id_by_level[level]]
        c[0] += 1
        c[1] += rec.n
        c[2] += rec.y
    return {aid: tuple(v) for aid, v in counts.items()}


@dataclass(frozen=True)
class CovariateTable:
    """Standardized area-level covariates with the recorded affine transform.

    `columns[name][area_id]` holds the standardized value; `transforms[name]`
    is the (mean, sd) removed from the raw column, for back-reporting.
    """

    level: int
    columns: Mapping[str, Mapping[str, float]]
    transforms: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def names(self) -> tuple[str, ...]:
        return tuple(self.columns)

    def matrix(self, area_ids: Sequence[str], names: Sequence[str]) -> np.ndarray:
        for nm in names:
            if nm not in self.columns:
                raise CovariateError(f"unknown covariate column {nm!r}")
        return np.array([[self.columns[nm][aid] for nm in names] for aid in area_ids])


def load_covariates(source, level: int, graph: AreaGraph) -> CovariateTable:
    """Load an area_id-keyed covariate file for one level and standardize it.

    Each column is centered and scaled to unit variance; the (mean, sd)
    pair is recorded.  Constant columns are rejected as non-identifiable.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        s = str(source)
        text = s if ("\n" in s or "," in s) else open(s, "r", encoding="utf-8").read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")

    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    if "area_id" not in header:
        raise CovariateError(f"covariate file must have an area_id column, got {header}")
    names = [c for c in header if c != "area_id"]
    if not names:
        raise CovariateError("covariate file has no covariate columns")
    if len(set(names)) != len(names):
        raise CovariateError("duplicate covariate column names")

    raw: dict[str, dict[str, float]] = {nm: {} for nm in names}
    for k, row in enumerate(reader, start=1):
        aid = (row.get("area_id") or "").strip()
        if not graph.has_area(aid, level=level):
            raise CovariateError(f"row {k}: unknown area {aid!r} at level {level}")
        for nm in names:
            if aid in raw[nm]:
                raise CovariateError(f"row {k}: duplicate area {aid!r}")
            val = (row.get(nm) or "").strip()
            try:
                raw[nm][aid] = float(val)
            except ValueError:
                raise CovariateError(
                    f"row {k}: non-numeric value {val!r} in column {nm!r}"
                ) from None

    missing = [aid for aid in graph.area_ids(level) if aid not in raw[names[0]]]
    if missing:
        raise CovariateError(f"missing covariate rows for areas {missing}")

    area_ids = graph.area_ids(level)
    columns: dict[str, dict[str, float]] = {}
    transforms: dict[str, tuple[float, float]] = {}
    for nm in names:
        vals = np.array([raw[nm][aid] for aid in area_ids])
        mean = float(vals.mean())
        sd = float(vals.std())
        if sd == 0.0:
            raise CovariateError(f"column {nm!r} is constant (zero variance)")
        std = (vals - mean) / sd
        columns[nm] = {aid: float(v) for aid, v in zip(area_ids, std)}
        transforms[nm] = (mean, sd)
    return CovariateTable(level=level, columns=columns, transforms=transforms)
