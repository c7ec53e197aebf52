from __future__ import annotations

import numpy as np
import pytest

from saeprev.data import AnalysisDataset, ClusterRecord, DatasetMetadata
from saeprev.graph import Area, AreaGraph, build_graph
from saeprev.synthetic import SyntheticDesignConfig, generate_synthetic, synthetic_graph

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(num: int, label: str, status: str) -> None:
    ACCEPTANCE_LINES.append(f"ACCEPTANCE {num:>2} {label}: {status}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def line_graph(n: int, nat: str = "NAT", prefix: str = "A") -> AreaGraph:
    """Path graph with n level-1 areas under one national area."""
    areas = [Area(nat, "National", 0, None)]
    areas += [Area(f"{prefix}{i+1}", f"Area {i+1}", 1, nat) for i in range(n)]
    edges = {1: [(f"{prefix}{i+1}", f"{prefix}{i+2}") for i in range(n - 1)]}
    return AreaGraph(areas, edges)


def make_dataset(rows, graph: AreaGraph, reference=None) -> AnalysisDataset:
    """rows: (cluster_id, stratum, {level: area}, w, n, y)."""
    records = [
        ClusterRecord(cid, st, ids, w, n, y) for cid, st, ids, w, n, y in rows
    ]
    meta = DatasetMetadata(
        survey="test", indicator="test", reference_national_estimate=reference
    )
    return AnalysisDataset(records, graph, meta)


@pytest.fixture
def path4() -> AreaGraph:
    return line_graph(4)


@pytest.fixture
def path5() -> AreaGraph:
    return line_graph(5)


@pytest.fixture
def two_level_graph() -> AreaGraph:
    """4 admin-1 areas on a 2x2 grid, each split into 4 admin-2 areas."""
    return synthetic_graph(4, admin2_per_admin1=4)


@pytest.fixture(scope="session")
def sparse_admin2():
    """Sparse synthetic design: many admin-2 areas with few clusters each."""
    graph = synthetic_graph(6, admin2_per_admin1=6)
    cfg = SyntheticDesignConfig(
        n_admin1=6,
        clusters_total=80,
        households_per_cluster=12,
        true_prevalence_field={"kind": "gradient", "low": 0.15, "high": 0.5},
        seed=11,
    )
    return graph, generate_synthetic(cfg, graph)


def simple_area_dataset(graph: AreaGraph, per_area, seed: int = 0) -> AnalysisDataset:
    """per_area: {area_id: [(w, n, y), ...]} for a one-level graph."""
    rows = []
    k = 0
    for aid, clusters in per_area.items():
        for w, n, y in clusters:
            k += 1
            rows.append(
                (f"c{k}", f"s-{aid}", {0: graph.root.id, 1: aid}, w, n, y)
            )
    return make_dataset(rows, graph)
