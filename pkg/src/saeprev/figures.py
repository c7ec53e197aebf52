"""Static figure rendering for the CLI report path.

Renders the report's plot-ready blocks to PNG files next to the delimited
output: choropleth maps when polygon geometry is available (hatching areas
without usable data), horizontal bars otherwise, plus scatter and ridge
panels.  Everything runs headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import PatchCollection  # noqa: E402
from matplotlib.patches import Polygon as MplPolygon  # noqa: E402

__all__ = ["render_map", "render_report_figures", "render_ridge", "render_scatter"]

STAT_LABELS = {
    "point": "point estimate",
    "ci_width": "95% interval width",
    "cv": "coefficient of variation (%)",
    "exceedance": "exceedance probability",
}


def _polygon_patches(geometry: dict) -> list[np.ndarray]:
    """Outer rings of a Polygon/MultiPolygon as coordinate arrays."""
    gtype = geometry.get("type")
    coords = geometry.get("coordinates", [])
    if gtype == "Polygon":
        return [np.asarray(coords[0])]
    if gtype == "MultiPolygon":
        return [np.asarray(poly[0]) for poly in coords]
    return []


def render_map(
    values: dict,
    geometry_by_area: dict,
    stat: str,
    path,
    flags: dict | None = None,
    title: str | None = None,
) -> Path:
    """Choropleth of one per-area statistic; falls back to bars without
    full polygon coverage.  Flagged or missing areas are hatched."""
    path = Path(path)
    flags = flags or {}
    ids = list(values)
    have_geo = all(geometry_by_area.get(a) for a in ids)

    fig, ax = plt.subplots(figsize=(7, 6))
    numeric = {a: v for a, v in values.items() if v is not None}
    vmin = min(numeric.values()) if numeric else 0.0
    vmax = max(numeric.values()) if numeric else 1.0
    if vmax <= vmin:
        vmax = vmin + 1e-9
    cmap = plt.get_cmap("viridis")

    if have_geo:
        patches, face, hatched = [], [], []
        for a in ids:
            for ring in _polygon_patches(geometry_by_area[a]):
                patches.append(MplPolygon(ring, closed=True))
                v = values[a]
                if v is None:
                    face.append((0.92, 0.92, 0.92, 1.0))
                    hatched.append(True)
                else:
                    face.append(cmap((v - vmin) / (vmax - vmin)))
                    hatched.append(bool(flags.get(a)))
        coll = PatchCollection(patches, edgecolor="white", linewidth=0.6)
        coll.set_facecolor(face)
        coll.set_hatch(None)
        ax.add_collection(coll)
        # hatch flagged areas with a second overlay collection
        overlay = [p for p, h in zip(patches, hatched) if h]
        if overlay:
            hcoll = PatchCollection(
                [MplPolygon(p.get_xy(), closed=True) for p in overlay],
                facecolor="none", edgecolor="0.4", hatch="///", linewidth=0.4,
            )
            ax.add_collection(hcoll)
        ax.autoscale_view()
        ax.set_aspect("equal")
        ax.set_axis_off()
        sm = plt.cm.ScalarMappable(cmap=cmap, norm=plt.Normalize(vmin, vmax))
        fig.colorbar(sm, ax=ax, shrink=0.75, label=STAT_LABELS.get(stat, stat))
    else:
        ys = np.arange(len(ids))
        vals = [values[a] if values[a] is not None else 0.0 for a in ids]
        colors = [
            cmap((v - vmin) / (vmax - vmin)) if values[a] is not None else "0.85"
            for a, v in zip(ids, vals)
        ]
        bars = ax.barh(ys, vals, color=colors)
        for bar, a in zip(bars, ids):
            if flags.get(a) or values[a] is None:
                bar.set_hatch("///")
        ax.set_yticks(ys, ids, fontsize=7)
        ax.invert_yaxis()
        ax.set_xlabel(STAT_LABELS.get(stat, stat))
    ax.set_title(title or STAT_LABELS.get(stat, stat))
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def render_scatter(block: dict, path) -> Path:
    path = Path(path)
    data = block["data"]
    xs = [p["a"] for p in data["pairs"]]
    ys = [p["b"] for p in data["pairs"]]
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    if xs:
        lo = min(min(xs), min(ys))
        hi = max(max(xs), max(ys))
        pad = 0.05 * (hi - lo or 1.0)
        ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], color="0.6", lw=1, ls="--")
        ax.scatter(xs, ys, s=18, alpha=0.8)
    ax.set_xlabel(f"{data['method_a']}: {data['stat']}")
    ax.set_ylabel(f"{data['method_b']}: {data['stat']}")
    ax.set_title(f"{data['stat']} comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def render_ridge(block: dict, path) -> Path:
    path = Path(path)
    curves = block["ridge"]["curves"]
    fig, ax = plt.subplots(figsize=(6.5, 0.6 * max(len(curves), 2) + 1.5))
    offset = 0.0
    yticks, labels = [], []
    for curve in curves:
        grid = np.asarray(curve["grid"])
        dens = np.asarray(curve["density"])
        peak = dens.max() or 1.0
        scaled = dens / peak * 0.9
        ax.fill_between(grid, offset, offset + scaled, alpha=0.7, lw=0.8)
        yticks.append(offset)
        labels.append(curve["area_id"])
        offset += 1.0
    ax.set_yticks(yticks, labels, fontsize=7)
    ax.set_xlim(0, 1)
    ax.set_xlabel("prevalence")
    ax.set_title(f"posterior prevalence ({block['method']}, level {block['level']})")
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
    return path


def render_report_figures(report: dict, geometry: dict | None, outdir) -> list[Path]:
    """Write every figure the report's plot blocks describe; returns paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    geometry_by_area = {}
    if geometry:
        for feat in geometry.get("features", []):
            props = feat.get("properties") or {}
            if feat.get("geometry"):
                geometry_by_area[str(props.get("id"))] = feat["geometry"]

    written: list[Path] = []
    for block in report["plots"]["map_stats"]:
        for stat, values in block["stats"].items():
            if all(v is None for v in values.values()):
                continue
            name = f"map_{block['method']}_L{block['level']}_{stat}.png"
            written.append(
                render_map(
                    values,
                    geometry_by_area,
                    stat,
                    outdir / name,
                    flags=block.get("flags"),
                    title=f"{block['method']} level {block['level']}: {STAT_LABELS.get(stat, stat)}",
                )
            )
    for k, block in enumerate(report["plots"]["scatter"]):
        stat = block["data"]["stat"]
        written.append(
            render_scatter(block, outdir / f"scatter_{k}_{stat}_L{block['level']}.png")
        )
    for block in report["plots"]["ridge"]:
        written.append(
            render_ridge(block, outdir / f"ridge_{block['method']}_L{block['level']}.png")
        )
    return written
