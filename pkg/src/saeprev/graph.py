"""Area hierarchy, adjacency, ICAR precision and BYM2 scaling.

The graph holds one adjacency structure per admin level.  The structured
spatial prior at a level uses the graph Laplacian Q (degree on the diagonal,
-1 for neighbours), rescaled so that the marginal variances of the intrinsic
field have geometric mean one.  Sum-to-zero is enforced per connected
component; singleton components (islands) carry no structured effect.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "Area",
    "AreaGraph",
    "GraphError",
    "build_graph",
    "connected_components",
    "icar_scale",
    "load_geometry",
]

_EIG_TOL = 1e-9


class GraphError(ValueError):
    """Invalid area hierarchy or adjacency input."""


@dataclass(frozen=True)
class Area:
    id: str
    name: str
    level: int
    parent_id: str | None


class AreaGraph:
    """Immutable area hierarchy with per-level adjacency and ICAR structure.

    Parameters
    ----------
    areas : sequence of Area
        Must contain exactly one level-0 area; every area at level k>0 must
        name a parent at level k-1; levels form a contiguous prefix 0..L.
    edges : mapping level -> iterable of (id, id)
        Unordered same-level adjacency pairs. Levels without an entry get an
        empty edge set.
    geometry : optional mapping id -> GeoJSON geometry dict, kept for plotting.
    """

    def __init__(
        self,
        areas: Sequence[Area],
        edges: Mapping[int, Iterable[tuple[str, str]]],
        geometry: Mapping[str, dict] | None = None,
    ):
        self._areas = tuple(areas)
        self._by_id: dict[str, Area] = {}
        for a in self._areas:
            if a.id in self._by_id:
                raise GraphError(f"duplicate area id {a.id!r}")
            self._by_id[a.id] = a

        levels = sorted({a.level for a in self._areas})
        if levels != list(range(len(levels))):
            raise GraphError(f"levels must form a contiguous prefix 0..L, got {levels}")
        self._levels = tuple(levels)

        roots = [a for a in self._areas if a.level == 0]
        if len(roots) != 1:
            raise GraphError(f"expected exactly one level-0 area, got {len(roots)}")
        self._root = roots[0]

        for a in self._areas:
            if a.level == 0:
                continue
            if a.parent_id is None or a.parent_id not in self._by_id:
                raise GraphError(f"area {a.id!r} has unknown parent {a.parent_id!r}")
            parent = self._by_id[a.parent_id]
            if parent.level != a.level - 1:
                raise GraphError(
                    f"area {a.id!r} at level {a.level} has parent at level {parent.level}"
                )

        self._ids_by_level: dict[int, tuple[str, ...]] = {
            lv: tuple(a.id for a in self._areas if a.level == lv) for lv in self._levels
        }
        self._index_by_level = {
            lv: {aid: i for i, aid in enumerate(ids)}
            for lv, ids in self._ids_by_level.items()
        }

        self._edges: dict[int, frozenset[tuple[str, str]]] = {}
        for lv in self._levels:
            pairs = set()
            for a, b in edges.get(lv, ()):  # type: ignore[union-attr]
                if a == b:
                    raise GraphError(f"self-loop edge on {a!r}")
                for aid in (a, b):
                    if aid not in self._by_id:
                        raise GraphError(f"edge references unknown area {aid!r}")
                    if self._by_id[aid].level != lv:
                        raise GraphError(
                            f"edge ({a!r}, {b!r}) declared at level {lv} touches "
                            f"area {aid!r} of level {self._by_id[aid].level}"
                        )
                pairs.add((a, b) if a < b else (b, a))
            self._edges[lv] = frozenset(pairs)

        self._geometry = dict(geometry or {})
        self._scale_cache: dict[int, float] = {}
        self._cov_cache: dict[int, np.ndarray] = {}

    # -- basic accessors ---------------------------------------------------

    @property
    def areas(self) -> tuple[Area, ...]:
        return self._areas

    @property
    def levels(self) -> tuple[int, ...]:
        return self._levels

    @property
    def root(self) -> Area:
        return self._root

    def area(self, area_id: str) -> Area:
        try:
            return self._by_id[area_id]
        except KeyError:
            raise GraphError(f"unknown area {area_id!r}") from None

    def has_area(self, area_id: str, level: int | None = None) -> bool:
        a = self._by_id.get(area_id)
        return a is not None and (level is None or a.level == level)

    def area_ids(self, level: int) -> tuple[str, ...]:
        self._check_level(level)
        return self._ids_by_level[level]

    def index(self, level: int) -> dict[str, int]:
        self._check_level(level)
        return dict(self._index_by_level[level])

    def edges(self, level: int) -> frozenset[tuple[str, str]]:
        self._check_level(level)
        return self._edges[level]

    def geometry(self, area_id: str) -> dict | None:
        return self._geometry.get(area_id)

    def ancestor_at(self, area_id: str, level: int) -> str:
        """Walk parent links from `area_id` up to the requested level."""
        a = self.area(area_id)
        if level > a.level:
            raise GraphError(f"area {area_id!r} is above level {level}")
        while a.level > level:
            a = self.area(a.parent_id)  # type: ignore[arg-type]
        return a.id

    def children(self, area_id: str) -> tuple[str, ...]:
        return tuple(a.id for a in self._areas if a.parent_id == area_id)

    def _check_level(self, level: int) -> None:
        if level not in self._levels:
            raise GraphError(f"level {level} not present (have {list(self._levels)})")

    # -- spatial structure ---------------------------------------------------

    def icar_precision(self, level: int) -> np.ndarray:
        """Unscaled ICAR precision: the graph Laplacian at this level."""
        ids = self.area_ids(level)
        idx = self._index_by_level[level]
        n = len(ids)
        Q = np.zeros((n, n))
        for a, b in self._edges[level]:
            i, j = idx[a], idx[b]
            Q[i, j] -= 1.0
            Q[j, i] -= 1.0
            Q[i, i] += 1.0
            Q[j, j] += 1.0
        return Q

    def components(self, level: int) -> tuple[tuple[str, ...], ...]:
        return connected_components(self, level)

    def component_indices(self, level: int) -> tuple[tuple[int, ...], ...]:
        idx = self._index_by_level[level]
        return tuple(
            tuple(idx[a] for a in comp) for comp in connected_components(self, level)
        )

    def singleton_mask(self, level: int) -> np.ndarray:
        n = len(self.area_ids(level))
        mask = np.zeros(n, dtype=bool)
        for comp in self.component_indices(level):
            if len(comp) == 1:
                mask[comp[0]] = True
        return mask

    def scale_factor(self, level: int) -> float:
        if level not in self._scale_cache:
            self._scale_cache[level] = icar_scale(self, level)
        return self._scale_cache[level]

    def scaled_precision(self, level: int) -> np.ndarray:
        return self.scale_factor(level) * self.icar_precision(level)

    def scaled_covariance(self, level: int) -> np.ndarray:
        """Generalized inverse of the scaled precision, sum-to-zero per
        component; zero rows/columns for singleton areas."""
        if level not in self._cov_cache:
            Q = self.scaled_precision(level)
            self._cov_cache[level] = _constrained_ginv(Q, self.component_indices(level))
        return self._cov_cache[level]

    def structure_eigenvalues(self, level: int) -> np.ndarray:
        """Eigenvalues of the scaled structured covariance on the constrained
        subspace (one per non-singleton area minus one per component)."""
        cov = self.scaled_covariance(level)
        vals = np.linalg.eigvalsh(cov)
        tol = _EIG_TOL * max(1.0, float(vals.max(initial=0.0)))
        return np.sort(vals[vals > tol])


def _constrained_ginv(
    Q: np.ndarray, components: tuple[tuple[int, ...], ...]
) -> np.ndarray:
    """Blockwise generalized inverse of a PSD precision, inverting the
    spectrum above tolerance within each non-singleton component."""
    n = Q.shape[0]
    G = np.zeros_like(Q)
    for comp in components:
        if len(comp) < 2:
            continue
        sub = np.ix_(comp, comp)
        Qc = Q[sub]
        w, V = np.linalg.eigh(Qc)
        tol = _EIG_TOL * max(1.0, float(w.max()))
        inv = np.where(w > tol, 1.0 / np.where(w > tol, w, 1.0), 0.0)
        G[sub] = (V * inv) @ V.T
    return G if n else G


def connected_components(graph: AreaGraph, level: int) -> tuple[tuple[str, ...], ...]:
    """Connected components at a level, singletons listed explicitly.

    Components are ordered by their smallest member index; members keep the
    graph's area order.
    """
    ids = graph.area_ids(level)
    idx = {a: i for i, a in enumerate(ids)}
    adj: dict[str, list[str]] = {a: [] for a in ids}
    for a, b in graph.edges(level):
        adj[a].append(b)
        adj[b].append(a)
    seen: set[str] = set()
    comps: list[tuple[str, ...]] = []
    for start in ids:
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nb in adj[cur]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        comps.append(tuple(sorted(comp, key=idx.__getitem__)))
    return tuple(comps)


def icar_scale(graph: AreaGraph, level: int) -> float:
    """Scaling constant for the intrinsic field at a level.

    Geometric mean of the marginal variances (diagonal of the sum-to-zero
    constrained generalized inverse of the Laplacian) over all areas in
    non-singleton components.  Multiplying the Laplacian by this constant
    gives a structured effect whose marginal variances have geometric mean 1.
    """
    comps = graph.component_indices(level)
    if all(len(c) < 2 for c in comps):
        raise GraphError(
            f"level {level} has only singleton components; scaling undefined"
        )
    Q = graph.icar_precision(level)
    G = _constrained_ginv(Q, comps)
    diag = np.array(
        [G[i, i] for comp in comps if len(comp) >= 2 for i in comp]
    )
    return float(np.exp(np.mean(np.log(diag))))


# -- construction -----------------------------------------------------------


def load_geometry(path_or_obj) -> dict:
    """Read a feature collection from a path, JSON string, or parsed dict."""
    if isinstance(path_or_obj, dict):
        return path_or_obj
    text = None
    if hasattr(path_or_obj, "read"):
        text = path_or_obj.read()
    else:
        s = str(path_or_obj)
        if s.lstrip().startswith("{"):
            text = s
        else:
            with open(s, "r", encoding="utf-8") as fh:
                text = fh.read()
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return json.loads(text)


def build_graph(
    geometry=None,
    areas: Sequence[Area] | Sequence[Mapping] | None = None,
    edges: Mapping[int, Iterable[tuple[str, str]]] | Iterable[tuple] | None = None,
    epsilon: float = 0.0,
) -> AreaGraph:
    """Build an AreaGraph from a feature collection and/or explicit edges.

    Geometry mode: each feature carries properties id, name, level and
    parent_id; two same-level polygons are adjacent when they share a
    boundary point exactly (or within `epsilon` when > 0).  Features with
    null geometry are allowed only when edges for their level are supplied
    explicitly.

    Edge-list mode: `areas` supplies the hierarchy and `edges` the adjacency,
    either as {level: [(a, b), ...]} or as rows (level, a, b).
    """
    area_list: list[Area] = []
    geoms: dict[str, dict] = {}

    if geometry is not None:
        fc = load_geometry(geometry)
        feats = fc.get("features")
        if feats is None:
            raise GraphError("geometry input has no 'features' array")
        for k, feat in enumerate(feats):
            props = feat.get("properties") or {}
            try:
                aid = str(props["id"])
                level = int(props["level"])
            except KeyError as exc:
                raise GraphError(f"feature {k} missing property {exc}") from None
            parent = props.get("parent_id")
            area_list.append(
                Area(
                    id=aid,
                    name=str(props.get("name", aid)),
                    level=level,
                    parent_id=None if parent is None else str(parent),
                )
            )
            if feat.get("geometry"):
                geoms[aid] = feat["geometry"]

    if areas is not None:
        for a in areas:
            if isinstance(a, Area):
                area_list.append(a)
            else:
                area_list.append(
                    Area(
                        id=str(a["id"]),
                        name=str(a.get("name", a["id"])),
                        level=int(a["level"]),
                        parent_id=None
                        if a.get("parent_id") in (None, "")
                        else str(a["parent_id"]),
                    )
                )

    if not area_list:
        raise GraphError("no areas supplied")

    edge_map: dict[int, list[tuple[str, str]]] = {}
    if edges is not None:
        if isinstance(edges, Mapping):
            for lv, pairs in edges.items():
                edge_map.setdefault(int(lv), []).extend(
                    (str(a), str(b)) for a, b in pairs
                )
        else:
            for row in edges:
                lv, a, b = row
                edge_map.setdefault(int(lv), []).append((str(a), str(b)))
    else:
        by_level: dict[int, list[Area]] = {}
        for a in area_list:
            by_level.setdefault(a.level, []).append(a)
        for lv, members in by_level.items():
            if lv == 0 or len(members) < 2:
                edge_map.setdefault(lv, [])
                continue
            missing = [a.id for a in members if a.id not in geoms]
            if missing:
                raise GraphError(
                    f"level {lv}: no geometry for {missing[:3]} and no explicit edges"
                )
            edge_map[lv] = _adjacency_from_geometry(
                [(a.id, geoms[a.id]) for a in members], epsilon
            )

    return AreaGraph(area_list, edge_map, geometry=geoms)


def _geometry_vertices(geom: Mapping) -> list[tuple[float, float]]:
    gtype = geom.get("type")
    coords = geom.get("coordinates", [])
    rings: list = []
    if gtype == "Polygon":
        rings = coords
    elif gtype == "MultiPolygon":
        rings = [ring for poly in coords for ring in poly]
    else:
        raise GraphError(f"unsupported geometry type {gtype!r}")
    return [(float(x), float(y)) for ring in rings for x, y in ring]


def _adjacency_from_geometry(
    items: list[tuple[str, Mapping]], epsilon: float
) -> list[tuple[str, str]]:
    def key(pt: tuple[float, float]):
        if epsilon > 0:
            return (math.floor(pt[0] / epsilon + 0.5), math.floor(pt[1] / epsilon + 0.5))
        return pt

    owners: dict[object, set[str]] = {}
    for aid, geom in items:
        for pt in _geometry_vertices(geom):
            owners.setdefault(key(pt), set()).add(aid)
    pairs: set[tuple[str, str]] = set()
    for ids in owners.values():
        if len(ids) < 2:
            continue
        ordered = sorted(ids)
        for i, a in enumerate(ordered):
            for b in ordered[i + 1 :]:
                pairs.add((a, b))
    return sorted(pairs)
