"""Decision-support statistics and plot-ready data from fitted results.

Model-based summaries are computed from the cached posterior sample matrix
(quantile intervals, CV with the posterior sd in place of the standard
error, exceedance probabilities); direct summaries pass through the
design-based intervals.  Ridge curves are boundary-reflected kernel
densities on a fixed 512-point grid over [0,1].
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .direct import FLAG_OK, DirectEstimates

__all__ = [
    "AreaSummary",
    "RidgeSelection",
    "SummaryOptions",
    "exceedance",
    "ridge_data",
    "scatter_data",
    "summarize",
    "tabulate",
    "tabulation_csv",
]

TABULATION_COLUMNS = (
    "area",
    "level",
    "method",
    "point",
    "ci_low",
    "ci_high",
    "ci_width",
    "cv",
    "exceedance",
    "flags",
)

RIDGE_GRID_SIZE = 512


@dataclass(frozen=True)
class SummaryOptions:
    point: str = "median"          # "median" or "mean"
    p0: float | None = None        # exceedance threshold for model results
    n_samples: int | None = None   # None: the result's native draw count
    seed: int | None = None        # None: the result's own seed

    def __post_init__(self):
        if self.point not in ("median", "mean"):
            raise ValueError(f"point must be median or mean, got {self.point!r}")
        if self.p0 is not None and not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must be in [0,1], got {self.p0}")


@dataclass(frozen=True)
class AreaSummary:
    area_id: str
    level: int
    method: str
    point: float | None
    ci_low: float | None
    ci_high: float | None
    ci_width: float | None
    cv: float | None
    exceedance_p0: float | None
    exceedance: float | None
    flags: tuple[str, ...]
    seed: int | None
    options: dict = field(default_factory=dict)

    def stat(self, name: str):
        if name == "point":
            return self.point
        if name in ("ci_low", "ci_high", "ci_width", "cv", "exceedance"):
            return getattr(self, name)
        raise ValueError(f"unknown statistic {name!r}")


def _is_posterior_like(result) -> bool:
    return callable(getattr(result, "samples", None)) and hasattr(result, "area_ids")


def summarize(result, options: SummaryOptions = SummaryOptions()) -> list[AreaSummary]:
    """Per-area summary rows for a direct or model-based result.

    Model-based inputs are anything with the posterior sample interface
    (``samples()``, ``area_ids``, ``extrapolated``, provenance fields), i.e.
    a live PosteriorResult or a stored fit artifact.
    """
    if isinstance(result, DirectEstimates):
        return _summarize_direct(result, options)
    if _is_posterior_like(result):
        return _summarize_posterior(result, options)
    raise TypeError(f"cannot summarize {type(result).__name__}")


def _summarize_direct(direct: DirectEstimates, options: SummaryOptions) -> list[AreaSummary]:
    out = []
    for aid, a in direct.areas.items():
        cv = None
        if a.flag == FLAG_OK and a.p_hat > 0:
            cv = 100.0 * math.sqrt(a.var_p) / a.p_hat
        width = None
        if a.ci_low is not None:
            width = a.ci_high - a.ci_low
        flags = () if a.flag == FLAG_OK else (a.flag,)
        out.append(
            AreaSummary(
                area_id=aid,
                level=direct.level,
                method="direct",
                point=a.p_hat,
                ci_low=a.ci_low,
                ci_high=a.ci_high,
                ci_width=width,
                cv=cv,
                exceedance_p0=None,
                exceedance=None,
                flags=flags,
                seed=None,
                options={"point": "weighted"},
            )
        )
    return out


def _summarize_posterior(result, options: SummaryOptions) -> list[AreaSummary]:
    samples = result.samples(n_samples=options.n_samples, seed=options.seed)
    centers = (
        np.median(samples, axis=0) if options.point == "median" else samples.mean(axis=0)
    )
    lo, hi = np.quantile(samples, [0.025, 0.975], axis=0)
    sd = samples.std(axis=0, ddof=1)
    exc = None
    if options.p0 is not None:
        exc = (samples > options.p0).mean(axis=0)

    provenance = dict(result.options)
    provenance["point"] = options.point
    out = []
    for i, aid in enumerate(result.area_ids):
        point = float(centers[i])
        out.append(
            AreaSummary(
                area_id=aid,
                level=result.level,
                method=result.method,
                point=point,
                ci_low=float(lo[i]),
                ci_high=float(hi[i]),
                ci_width=float(hi[i] - lo[i]),
                cv=100.0 * float(sd[i]) / point if point > 0 else None,
                exceedance_p0=options.p0,
                exceedance=None if exc is None else float(exc[i]),
                flags=("extrapolated",) if result.extrapolated[i] else (),
                seed=options.seed if options.seed is not None else result.seed,
                options=provenance,
            )
        )
    return out


def exceedance(result, p0: float) -> dict[str, float]:
    """Pr(prevalence > p0) per area from the cached posterior samples.

    p0 may be 0 or 1: samples live strictly inside (0,1), so those
    thresholds give probabilities exactly 1 and 0.
    """
    if not _is_posterior_like(result):
        raise TypeError("exceedance requires a model-based posterior result")
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must be in [0,1], got {p0}")
    samples = result.samples()
    probs = (samples > p0).mean(axis=0)
    return {aid: float(probs[i]) for i, aid in enumerate(result.area_ids)}


def scatter_data(
    a: Sequence[AreaSummary], b: Sequence[AreaSummary], stat: str
) -> dict:
    """Inner join of one statistic across two summary lists, by area."""
    if not a or not b:
        raise ValueError("both summary lists must be non-empty")
    if a[0].level != b[0].level:
        raise ValueError(f"level mismatch: {a[0].level} vs {b[0].level}")
    va = {s.area_id: s.stat(stat) for s in a}
    vb = {s.area_id: s.stat(stat) for s in b}
    pairs = []
    unmatched = []
    for aid in sorted(set(va) | set(vb)):
        x, y = va.get(aid), vb.get(aid)
        if x is not None and y is not None:
            pairs.append({"area_id": aid, "a": float(x), "b": float(y)})
        else:
            unmatched.append(aid)
    return {
        "stat": stat,
        "method_a": a[0].method,
        "method_b": b[0].method,
        "pairs": pairs,
        "unmatched": unmatched,
    }


@dataclass(frozen=True)
class RidgeSelection:
    kind: str                     # all_level1 | within | top_bottom
    admin1_id: str | None = None
    x: int | None = None

    def __post_init__(self):
        if self.kind not in ("all_level1", "within", "top_bottom"):
            raise ValueError(f"unknown ridge selection {self.kind!r}")
        if self.kind == "within" and not self.admin1_id:
            raise ValueError("within selection needs an admin1 id")
        if self.kind == "top_bottom" and (self.x is None or self.x < 1):
            raise ValueError("top_bottom selection needs x >= 1")

    @classmethod
    def parse(cls, text: str) -> "RidgeSelection":
        if text == "all_level1":
            return cls("all_level1")
        if text.startswith("within:"):
            return cls("within", admin1_id=text.split(":", 1)[1])
        if text.startswith("top_bottom:"):
            return cls("top_bottom", x=int(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse ridge selection {text!r}")


def _silverman_bandwidth(x: np.ndarray) -> float:
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    scale = min(sd, iqr / 1.34) if iqr > 0 else sd
    bw = 0.9 * scale * x.size ** (-0.2)
    return max(bw, 1e-4)


def _kde_reflected(x: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Gaussian KDE with reflection at 0 and 1, renormalized on the grid."""
    bw = _silverman_bandwidth(x)
    pts = np.concatenate([x, -x, 2.0 - x])
    dens = np.zeros_like(grid)
    norm = 1.0 / (x.size * bw * math.sqrt(2.0 * math.pi))
    for start in range(0, pts.size, 4096):
        chunk = pts[start : start + 4096]
        z = (grid[:, None] - chunk[None, :]) / bw
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    dens *= norm
    total = np.trapezoid(dens, grid)
    return dens / total


def ridge_data(result, selection: RidgeSelection) -> dict:
    """Density curves of the posterior prevalence for selected areas,
    ordered by ascending posterior median (area id breaks ties)."""
    if not _is_posterior_like(result):
        raise TypeError("ridge_data requires a model-based posterior result")
    samples = result.samples()
    medians = np.median(samples, axis=0)
    ids = list(result.area_ids)
    note = None

    if selection.kind == "all_level1":
        if result.level != 1:
            raise ValueError("all_level1 selection applies to level-1 results")
        chosen = set(ids)
    elif selection.kind == "within":
        if result.admin1_ancestor is None:
            raise ValueError("result carries no admin-1 ancestry")
        chosen = {
            aid
            for aid, anc in zip(ids, result.admin1_ancestor)
            if anc == selection.admin1_id
        }
        if not chosen:
            raise ValueError(f"no areas under admin-1 {selection.admin1_id!r}")
    else:
        order = sorted(range(len(ids)), key=lambda i: (medians[i], ids[i]))
        x = selection.x
        if 2 * x >= len(ids):
            note = f"top_bottom({x}) covers all {len(ids)} areas"
            chosen = set(ids)
        else:
            chosen = {ids[i] for i in order[:x]} | {ids[i] for i in order[-x:]}

    grid = np.linspace(0.0, 1.0, RIDGE_GRID_SIZE)
    rows = [
        (float(medians[i]), aid, i) for i, aid in enumerate(ids) if aid in chosen
    ]
    rows.sort(key=lambda r: (r[0], r[1]))
    curves = [
        {
            "area_id": aid,
            "median": med,
            "grid": grid.tolist(),
            "density": _kde_reflected(samples[:, i], grid).tolist(),
        }
        for med, aid, i in rows
    ]
    return {"selection": selection.kind, "note": note, "curves": curves}


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.6g}"


def tabulate(*summary_lists: Sequence[AreaSummary]) -> list[dict]:
    """Flatten summary lists to rows with the stable tabulation columns."""
    if not summary_lists:
        raise ValueError("at least one summary list required")
    rows = []
    for summaries in summary_lists:
        for s in summaries:
            rows.append(
                {
                    "area": s.area_id,
                    "level": str(s.level),
                    "method": s.method,
                    "point": _fmt(s.point),
                    "ci_low": _fmt(s.ci_low),
                    "ci_high": _fmt(s.ci_high),
                    "ci_width": _fmt(s.ci_width),
                    "cv": _fmt(s.cv),
                    "exceedance": _fmt(s.exceedance),
                    "flags": ";".join(s.flags),
                }
            )
    return rows


def tabulation_csv(rows: list[dict]) -> str:
    """Serialize tabulation rows to comma-delimited text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TABULATION_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
