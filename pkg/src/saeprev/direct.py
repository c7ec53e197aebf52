"""Design-based weighted prevalence estimation.

Point estimates are weighted ratios of successes to trials within each area;
variances come from Taylor linearization of that ratio under stratified
with-replacement sampling of clusters, and intervals are formed on the logit
scale.  Areas where the machinery breaks down are flagged rather than
guessed at: no clusters at all -> no_data, a point estimate of 0 or 1 or a
non-positive variance -> low_information with no uncertainty reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .data import AnalysisDataset

__all__ = [
    "AreaDirect",
    "DirectEstimates",
    "Z975",
    "design_variance",
    "hajek",
    "national_consistency_check",
]

Z975 = 1.959964  # normal 97.5% quantile used for all 95% intervals

FLAG_OK = "ok"
FLAG_NO_DATA = "no_data"
FLAG_LOW_INFO = "low_information"


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class AreaDirect:
    """Direct-estimate entry for one area."""

    p_hat: float | None
    var_p: float | None
    logit_var: float | None
    ci_low: float | None
    ci_high: float | None
    flag: str
    n_clusters: int
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class DirectEstimates:
    """Per-area weighted estimates at one admin level.

    `variance_complete` distinguishes the points-only stage from the
    finished object with variances and intervals.
    """

    level: int
    areas: Mapping[str, AreaDirect]
    variance_complete: bool

    def __post_init__(self):
        for aid, a in self.areas.items():
            if a.flag == FLAG_NO_DATA:
                assert a.p_hat is None and a.n_clusters == 0, aid
            elif a.flag == FLAG_LOW_INFO:
                assert a.p_hat is not None and a.logit_var is None, aid
            elif self.variance_complete:
                assert a.flag == FLAG_OK, aid
                assert None not in (a.p_hat, a.var_p, a.logit_var, a.ci_low, a.ci_high), aid
                assert a.ci_low <= a.p_hat <= a.ci_high, aid

    def flag_counts(self) -> tuple[int, int, int]:
        """(n_areas, n_no_data, n_low_information)."""
        flags = [a.flag for a in self.areas.values()]
        return len(flags), flags.count(FLAG_NO_DATA), flags.count(FLAG_LOW_INFO)

    def included_ids(self) -> tuple[str, ...]:
        return tuple(aid for aid, a in self.areas.items() if a.flag == FLAG_OK)


def hajek(ds: AnalysisDataset, level: int) -> DirectEstimates:
    """Weighted ratio estimator per area: sum(w*y) / sum(w*n) over clusters.

    Returns a points-only result; areas without usable clusters are flagged
    no_data, and point estimates of exactly 0 or 1 are flagged
    low_information immediately (their variance formula is unusable).
    """
    ds.require_level(level)
    area_idx, w, n, y = ds.arrays(level)
    ids = ds.graph.area_ids(level)
    n_areas = len(ids)

    usable = n > 0
    wy = np.bincount(area_idx[usable], weights=(w * y)[usable], minlength=n_areas)
    wn = np.bincount(area_idx[usable], weights=(w * n)[usable], minlength=n_areas)
    m = np.bincount(area_idx[usable], minlength=n_areas)

    out: dict[str, AreaDirect] = {}
    for i, aid in enumerate(ids):
        if m[i] == 0:
            out[aid] = AreaDirect(None, None, None, None, None, FLAG_NO_DATA, 0)
            continue
        p = float(wy[i] / wn[i])
        if p <= 0.0 or p >= 1.0:
            out[aid] = AreaDirect(p, None, None, None, None, FLAG_LOW_INFO, int(m[i]))
        else:
            out[aid] = AreaDirect(p, None, None, None, None, FLAG_OK, int(m[i]))
    return DirectEstimates(level=level, areas=out, variance_complete=False)


def design_variance(ds: AnalysisDataset, level: int) -> DirectEstimates:
    """Complete the direct estimates with linearized variances and intervals.

    Cluster score u_c = w_c (y_c - p_hat n_c) / sum(w n); the variance sums
    m_h/(m_h-1) * sum((u_c - mean_h)^2) over the strata represented in the
    area.  Single-cluster strata contribute zero and leave a note.  The 95%
    interval is formed on the logit scale via the delta method and
    back-transformed.
    """
    points = hajek(ds, level)
    area_idx, w, n, y = ds.arrays(level)
    ids = ds.graph.area_ids(level)
    strata = np.array([r.stratum_id for r in ds.records])
    usable = n > 0

    out: dict[str, AreaDirect] = {}
    for i, aid in enumerate(ids):
        entry = points.areas[aid]
        if entry.flag == FLAG_NO_DATA:
            out[aid] = entry
            continue
        sel = (area_idx == i) & usable
        p = entry.p_hat
        denom = float(np.sum(w[sel] * n[sel]))
        u = w[sel] * (y[sel] - p * n[sel]) / denom
        # scale of the terms before cancellation: a computed variance below
        # this floor is floating-point residue of a mathematically zero one
        noise = 1e-12 * float(np.sum(w[sel] * (y[sel] + p * n[sel]))) / denom

        var = 0.0
        notes: list[str] = []
        for h in np.unique(strata[sel]):
            uh = u[strata[sel] == h]
            mh = uh.size
            if mh < 2:
                notes.append(f"stratum {h} has a single cluster in this area; zero variance contribution")
                continue
            var += mh / (mh - 1.0) * float(np.sum((uh - uh.mean()) ** 2))

        if entry.flag == FLAG_LOW_INFO:
            out[aid] = replace(entry, notes=tuple(notes))
            continue
        if not (var > noise**2 and math.isfinite(var)):
            out[aid] = AreaDirect(
                p, None, None, None, None, FLAG_LOW_INFO, entry.n_clusters, tuple(notes)
            )
            continue

        lvar = var / (p * (1.0 - p)) ** 2
        half = Z975 * math.sqrt(lvar)
        lo, hi = _expit(_logit(p) - half), _expit(_logit(p) + half)
        out[aid] = AreaDirect(p, var, lvar, lo, hi, FLAG_OK, entry.n_clusters, tuple(notes))
    return DirectEstimates(level=level, areas=out, variance_complete=True)


def national_consistency_check(
    ds: AnalysisDataset, tolerance: float = 0.005
) -> dict:
    """Compare the national weighted estimate against the reference value.

    Returns {computed, reference, tolerance, status} with status pass/fail
    on |computed - reference| <= tolerance, or no_reference when the dataset
    metadata carries no reference estimate.
    """
    national = hajek(ds, 0)
    root = ds.graph.root.id
    computed = national.areas[root].p_hat
    reference = ds.metadata.reference_national_estimate
    if reference is None:
        status = "no_reference"
    elif computed is not None and abs(computed - reference) <= tolerance:
        status = "pass"
    else:
        status = "fail"
    return {
        "computed": computed,
        "reference": reference,
        "tolerance": tolerance,
        "status": status,
    }
