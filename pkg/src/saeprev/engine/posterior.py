"""Posterior container: grid mixture of Gaussian latent approximations,
reproducible prevalence sampling, and deterministic moment summaries."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .fits import PointFit
from .grid import HyperGrid
from .latent import EngineError, LatentModelSpec

__all__ = ["PosteriorResult", "sample_posterior"]

DEFAULT_SAMPLES = 4000
MIN_SAMPLES = 100
GH_NODES = 64

_gh_nodes, _gh_weights = np.polynomial.hermite.hermgauss(GH_NODES)
_gh_weights = _gh_weights / math.sqrt(math.pi)


def _expit(x):
    return 1.0 / (1.0 + np.exp(-x))


class PosteriorResult:
    """Fitted hyper grid plus per-point latent Gaussian approximations.

    Immutable after construction; sampling is a pure function of the stored
    state and an explicit seed, and the default-seed sample matrix is cached.
    """

    def __init__(
        self,
        spec: LatentModelSpec,
        grid: HyperGrid,
        fits: Sequence[PointFit],
        method: str,
        options: dict,
        seed: int,
        extrapolated: Sequence[bool],
        diagnostics: dict | None = None,
        admin1_ancestor: Sequence[str] | None = None,
    ):
        if len(fits) != len(grid.points):
            raise EngineError("one fit per grid point required")
        self.spec = spec
        self.grid = grid
        self.fits = tuple(fits)
        self.method = method
        self.options = dict(options)
        self.seed = int(seed)
        self.extrapolated = tuple(bool(b) for b in extrapolated)
        self.diagnostics = dict(diagnostics or {})
        self.admin1_ancestor = None if admin1_ancestor is None else tuple(admin1_ancestor)
        self._sample_cache: dict[tuple[int, int], np.ndarray] = {}

    @classmethod
    def single_point(
        cls,
        spec: LatentModelSpec,
        fit: PointFit,
        method: str = "fixed",
        options: dict | None = None,
        seed: int = 0,
        extrapolated: Sequence[bool] | None = None,
        admin1_ancestor: Sequence[str] | None = None,
    ) -> "PosteriorResult":
        """Degenerate one-point grid around a fixed-hyperparameter fit."""
        names = tuple(sorted(fit.hyper))
        point = np.array([[fit.hyper[k] for k in names]])
        grid = HyperGrid(
            axis_names=names,
            axes=tuple(np.array([fit.hyper[k]]) for k in names),
            points=point,
            log_weights=np.zeros(1),
            mode=point[0],
            mode_sd=np.zeros(len(names)),
        )
        if extrapolated is None:
            extrapolated = [False] * spec.n_areas
        return cls(
            spec,
            grid,
            [fit],
            method,
            options or {},
            seed,
            extrapolated,
            admin1_ancestor=admin1_ancestor,
        )

    @property
    def level(self) -> int:
        return self.spec.level

    @property
    def area_ids(self) -> tuple[str, ...]:
        return self.spec.area_ids

    # -- sampling -------------------------------------------------------------

    def _point_factor(self, g: int):
        fit = self.fits[g]
        sigma, phi = fit.hyper["sigma"], fit.hyper["phi"]
        P = self.spec.posterior_precision(fit.obs_weight, sigma, phi)
        L = cholesky(P, lower=True)
        if self.spec.n_constraints:
            Y = cho_solve((L, True), self.spec.A.T)
            S = self.spec.A @ Y
        else:
            Y = S = None
        return L, Y, S

    def samples(self, n_samples: int | None = None, seed: int | None = None) -> np.ndarray:
        """Matrix (n_samples, n_areas) of area prevalence draws in (0,1).

        Each draw picks a grid point by weight, draws the latent Gaussian
        from that point's factorization, applies the sum-to-zero correction,
        and maps the area linear predictor through expit.  Bit-reproducible
        for a fixed seed; None falls back to the 4000-draw default.
        """
        if n_samples is None:
            n_samples = DEFAULT_SAMPLES
        if n_samples < MIN_SAMPLES:
            raise EngineError(f"n_samples must be at least {MIN_SAMPLES}")
        seed = self.seed if seed is None else int(seed)
        key = (int(n_samples), seed)
        if key in self._sample_cache:
            return self._sample_cache[key]

        rng = np.random.default_rng(seed)
        weights = self.grid.weights()
        weights = weights / weights.sum()
        gidx = rng.choice(len(weights), size=n_samples, p=weights)
        out = np.empty((n_samples, self.spec.n_areas))
        for g in np.unique(gidx):
            rows = np.flatnonzero(gidx == g)
            fit = self.fits[g]
            L, Y, S = self._point_factor(int(g))
            Z = rng.standard_normal((self.spec.m, rows.size))
            X = fit.mean_u[:, None] + solve_triangular(L.T, Z, lower=False)
            if self.spec.n_constraints:
                X = X - Y @ np.linalg.solve(S, self.spec.A @ X)
            sigma, phi = fit.hyper["sigma"], fit.hyper["phi"]
            eta = np.empty((rows.size, self.spec.n_areas))
            for j in range(rows.size):
                eta[j] = self.spec.linear_predictor(X[:, j], sigma, phi)
            out[rows] = _expit(eta)
        out = np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        out.setflags(write=False)
        self._sample_cache[key] = out
        return out

    # -- deterministic summaries ----------------------------------------------

    def linear_predictor_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mixture mean and variance of the area linear predictors."""
        weights = self.grid.weights()
        n = self.spec.n_areas
        mean = np.zeros(n)
        second = np.zeros(n)
        for g, fit in enumerate(self.fits):
            mu_g, var_g = self._point_eta_moments(g)
            mean += weights[g] * mu_g
            second += weights[g] * (var_g + mu_g**2)
        return mean, second - mean**2

    def _point_eta_moments(self, g: int) -> tuple[np.ndarray, np.ndarray]:
        fit = self.fits[g]
        sigma, phi = fit.hyper["sigma"], fit.hyper["phi"]
        D = self.spec.design_matrix(sigma, phi)
        P = self.spec.posterior_precision(fit.obs_weight, sigma, phi)
        cho = cho_factor(P, lower=True)
        T = cho_solve(cho, D.T)
        var = np.einsum("ij,ji->i", D, T)
        if self.spec.n_constraints:
            Y = cho_solve(cho, self.spec.A.T)
            S = self.spec.A @ Y
            DY = D @ Y
            var = var - np.einsum("ij,ji->i", DY, np.linalg.solve(S, DY.T))
        mu = self.spec.linear_predictor(fit.mean, sigma, phi)
        return mu, np.maximum(var, 0.0)

    def prevalence_moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature mean and sd of area prevalences (no Monte Carlo)."""
        weights = self.grid.weights()
        n = self.spec.n_areas
        mean = np.zeros(n)
        second = np.zeros(n)
        for g in range(len(self.fits)):
            mu_g, var_g = self._point_eta_moments(g)
            sd_g = np.sqrt(var_g)
            nodes = mu_g[:, None] + math.sqrt(2.0) * sd_g[:, None] * _gh_nodes[None, :]
            p_nodes = _expit(nodes)
            m1 = p_nodes @ _gh_weights
            m2 = (p_nodes**2) @ _gh_weights
            mean += weights[g] * m1
            second += weights[g] * m2
        var = np.maximum(second - mean**2, 0.0)
        return mean, np.sqrt(var)


def sample_posterior(
    result: PosteriorResult, n_samples: int = DEFAULT_SAMPLES, seed: int | None = None
) -> np.ndarray:
    """Draw reproducible area-prevalence samples from a fitted posterior."""
    return result.samples(n_samples=n_samples, seed=seed)
