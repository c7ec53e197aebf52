"""Hyperparameter integration on a mode-centered regular grid.

The posterior over transformed hyperparameters (log sigma, logit phi, and
logit d for count models) is explored by coordinate-wise golden-section
search, a finite-difference Hessian supplies per-axis scales, and a regular
grid of mode +- 2.5 sd is weighted by evidence times prior.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = ["HyperGrid", "GridSettings", "build_hyper_grid"]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_POINTS = {1: 25, 2: 15, 3: 9}
GRID_HALF_WIDTH = 2.5
SEARCH_TOL = 1e-3
MAX_SWEEPS = 6
SWEEP_MOVE_TOL = 5e-3
FD_STEP = 0.1
SD_FLOOR = 0.05
SD_CAP = 3.0


@dataclass(frozen=True)
class GridSettings:
    points_per_axis: int | None = None
    half_width_sd: float = GRID_HALF_WIDTH
    search_tol: float = SEARCH_TOL
    max_sweeps: int = MAX_SWEEPS


@dataclass(frozen=True)
class HyperGrid:
    axis_names: tuple[str, ...]
    axes: tuple[np.ndarray, ...]      # transformed coordinates per axis
    points: np.ndarray                # (G, n_axes) cartesian product, row-major
    log_weights: np.ndarray           # normalized: logsumexp == 0
    mode: np.ndarray
    mode_sd: np.ndarray
    warnings: tuple[str, ...] = field(default=())

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def posterior_mean(self, axis: int) -> float:
        return float(np.sum(self.weights() * self.points[:, axis]))


def _golden_max(f, lo: float, hi: float, tol: float) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _locate_mode(objective, init, brackets, settings: GridSettings):
    t = np.asarray(init, dtype=float).copy()
    brackets = [list(br) for br in brackets]
    warnings: list[str] = []
    for _ in range(settings.max_sweeps):
        t_before = t.copy()
        for ax in range(len(t)):

            def f_ax(v, ax=ax):
                tt = t.copy()
                tt[ax] = v
                return objective(tt)

            for _widen in range(4):
                lo, hi = brackets[ax]
                best = _golden_max(f_ax, lo, hi, settings.search_tol)
                edge = 0.02 * (hi - lo)
                if best - lo < edge:
                    brackets[ax][0] = lo - (hi - lo)
                    warnings.append(f"axis {ax}: mode at lower search bound, widened")
                elif hi - best < edge:
                    brackets[ax][1] = hi + (hi - lo)
                    warnings.append(f"axis {ax}: mode at upper search bound, widened")
                else:
                    break
            t[ax] = best
        if float(np.max(np.abs(t - t_before))) < SWEEP_MOVE_TOL:
            break
    return t, warnings


def _fd_sd(objective, mode: np.ndarray, f0: float) -> np.ndarray:
    """Per-axis posterior sd from a central finite-difference Hessian."""
    k = len(mode)
    h = FD_STEP
    H = np.zeros((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h
        H[i, i] = (objective(mode + ei) - 2.0 * f0 + objective(mode - ei)) / h**2
    for i in range(k):
        for j in range(i + 1, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h
            ej[j] = h
            H[i, j] = H[j, i] = (
                objective(mode + ei + ej)
                - objective(mode + ei - ej)
                - objective(mode - ei + ej)
                + objective(mode - ei - ej)
            ) / (4.0 * h**2)
    sd = None
    try:
        cov = np.linalg.inv(-H)
        diag = np.diag(cov)
        if np.all(diag > 0):
            sd = np.sqrt(diag)
    except np.linalg.LinAlgError:
        pass
    if sd is None:
        diag = -np.diag(H)
        sd = 1.0 / np.sqrt(np.maximum(diag, 1.0 / SD_CAP**2))
    return np.clip(sd, SD_FLOOR, SD_CAP)


def build_hyper_grid(
    fit_fn,
    log_prior,
    axis_names,
    init,
    brackets,
    settings: GridSettings = GridSettings(),
):
    """Locate the hyper mode, lay out the grid, and fit every grid point.

    `fit_fn(t) -> PointFit` evaluates the (approximate) evidence at a
    transformed coordinate vector; `log_prior(t)` the hyper prior there.
    Returns (HyperGrid, fits aligned with grid.points, diagnostics).
    """
    axis_names = tuple(axis_names)
    k = len(axis_names)
    cache: dict[tuple, float] = {}

    def objective(t):
        key = tuple(np.round(t, 10))
        if key not in cache:
            cache[key] = fit_fn(np.asarray(t)).log_evidence + log_prior(np.asarray(t))
        return cache[key]

    mode, warnings = _locate_mode(objective, init, brackets, settings)
    f0 = objective(mode)
    sd = _fd_sd(objective, mode, f0)

    n_pts = settings.points_per_axis or DEFAULT_POINTS.get(k, 9)
    axes = tuple(
        np.linspace(mode[i] - settings.half_width_sd * sd[i],
                    mode[i] + settings.half_width_sd * sd[i], n_pts)
        for i in range(k)
    )
    points = np.array(list(itertools.product(*axes)))
    fits = []
    raw = np.empty(len(points))
    for g, t in enumerate(points):
        fit = fit_fn(t)
        fits.append(fit)
        raw[g] = fit.log_evidence + log_prior(t)
    log_weights = raw - logsumexp(raw)

    # the weight mass should peak strictly inside the box
    best = points[int(np.argmax(log_weights))]
    on_edge = [
        axis_names[i]
        for i in range(k)
        if math.isclose(best[i], axes[i][0]) or math.isclose(best[i], axes[i][-1])
    ]
    if on_edge:
        warnings.append(f"maximum-weight grid point on boundary of axes {on_edge}")

    grid = HyperGrid(
        axis_names=axis_names,
        axes=axes,
        points=points,
        log_weights=log_weights,
        mode=mode,
        mode_sd=sd,
        warnings=tuple(warnings),
    )
    diagnostics = {
        "n_evaluations": len(cache) + len(points),
        "mode": mode.tolist(),
        "mode_sd": sd.tolist(),
        "warnings": list(grid.warnings),
    }
    return grid, fits, diagnostics
