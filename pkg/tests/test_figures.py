from __future__ import annotations

import json

import pytest

from saeprev.figures import render_map, render_report_figures, render_ridge, render_scatter
from saeprev.report import build_report
from saeprev.workflow import run_fit

from .test_workflow import bundle, small_inputs  # noqa: F401

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_choropleth_with_geometry(bundle, tmp_path):  # noqa: F811
    values = {aid: 0.1 * (i + 1) for i, aid in enumerate(bundle.graph.area_ids(1))}
    values[bundle.graph.area_ids(1)[0]] = None
    geometry_by_area = {
        aid: bundle.graph.geometry(aid) for aid in bundle.graph.area_ids(1)
    }
    path = render_map(values, geometry_by_area, "point", tmp_path / "m.png",
                      flags={bundle.graph.area_ids(1)[1]: ["extrapolated"]})
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_bar_fallback_without_geometry(tmp_path):
    values = {"A": 0.2, "B": 0.5, "C": None}
    path = render_map(values, {}, "cv", tmp_path / "bars.png")
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_report_figures_end_to_end(bundle, tmp_path):  # noqa: F811
    arts = [
        run_fit(bundle, "direct", 1, seed=3),
        run_fit(bundle, "area", 1, seed=3, n_samples=400),
    ]
    report = build_report(arts, p0=0.3)
    files = render_report_figures(report, arts[0].geometry, tmp_path)
    names = {f.name for f in files}
    assert any(n.startswith("map_direct") for n in names)
    assert any(n.startswith("map_area_level") for n in names)
    assert any(n.startswith("scatter_") for n in names)
    assert any(n.startswith("ridge_") for n in names)
    for f in files:
        assert f.read_bytes()[:8] == PNG_MAGIC


def test_scatter_and_ridge_render(bundle, tmp_path):  # noqa: F811
    arts = [
        run_fit(bundle, "direct", 1, seed=3),
        run_fit(bundle, "area", 1, seed=3, n_samples=400),
    ]
    report = build_report(arts)
    s = render_scatter(report["plots"]["scatter"][0], tmp_path / "s.png")
    r = render_ridge(report["plots"]["ridge"][0], tmp_path / "r.png")
    assert s.read_bytes()[:8] == PNG_MAGIC
    assert r.read_bytes()[:8] == PNG_MAGIC
