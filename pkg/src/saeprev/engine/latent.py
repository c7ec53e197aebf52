"""Latent Gaussian model layout and assembly.

The latent vector is [intercepts | covariate effects | e | s]: one intercept
(or one per admin-1 group in nested mode, or none), optional standardized
area covariates with vague normal priors, an unstructured standard-normal
field e and a structured field s under the scaled intrinsic prior.  The
area effect is mixed outside the prior as

    b_i = sigma * (sqrt(1-phi) * e_i + sqrt(phi) * s_i),

so the prior precision never depends on the hyperparameters and is factored
once.  Sum-to-zero is enforced on s per connected component (singletons are
pinned at zero) by conditioning-by-kriging after each fit.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = ["EngineError", "LatentModelSpec", "bym2_prior_precision"]

VAGUE_PRECISION = 1e-3
ICAR_JITTER = 1e-6

GAUSSIAN = "gaussian"
BETA_BINOMIAL = "beta_binomial"
BINOMIAL = "binomial"
LIKELIHOODS = (GAUSSIAN, BETA_BINOMIAL, BINOMIAL)


class EngineError(RuntimeError):
    """Numerical failure or inconsistent latent-model specification."""


class LatentModelSpec:
    """Validated latent layout with precomputed prior factorization.

    Parameters
    ----------
    area_ids : ordered area identifiers at the modeled level.
    Q_scaled : scaled intrinsic precision (graph Laplacian times the level's
        scale factor); pass a zero matrix when the level has no usable
        adjacency (all-singleton case).
    components : index tuples partitioning the areas into connected
        components; each contributes one sum-to-zero constraint.
    X : optional (n, p) standardized covariate matrix.
    intercept_groups : optional (n,) integer codes giving each area's
        intercept; None with n_intercepts=1 is the single global intercept,
        n_intercepts=0 removes the intercept block entirely.
    likelihood : one of "gaussian", "beta_binomial", "binomial".
    """

    def __init__(
        self,
        area_ids,
        Q_scaled: np.ndarray,
        components,
        X: np.ndarray | None = None,
        covariate_names=(),
        intercept_groups: np.ndarray | None = None,
        n_intercepts: int = 1,
        likelihood: str = GAUSSIAN,
        level: int = 0,
        vague_precision: float = VAGUE_PRECISION,
        icar_jitter: float = ICAR_JITTER,
    ):
        self.area_ids = tuple(area_ids)
        self.level = level
        n = len(self.area_ids)
        if n == 0:
            raise EngineError("no areas")
        Q_scaled = np.asarray(Q_scaled, dtype=float)
        if Q_scaled.shape != (n, n):
            raise EngineError(f"Q_scaled shape {Q_scaled.shape} != ({n},{n})")
        if likelihood not in LIKELIHOODS:
            raise EngineError(f"unknown likelihood {likelihood!r}")
        self.likelihood = likelihood
        self.Q_scaled = Q_scaled
        self.components = tuple(tuple(int(i) for i in comp) for comp in components)
        covered = sorted(i for comp in self.components for i in comp)
        if covered != list(range(n)):
            raise EngineError("components must partition jointly all area indices")

        if X is not None:
            X = np.asarray(X, dtype=float)
            if X.shape[0] != n:
                raise EngineError(f"covariate rows {X.shape[0]} != areas {n}")
        self.X = X
        self.covariate_names = tuple(covariate_names)
        p = 0 if X is None else X.shape[1]
        if len(self.covariate_names) not in (0, p):
            raise EngineError("covariate_names length mismatch")

        if intercept_groups is not None:
            intercept_groups = np.asarray(intercept_groups, dtype=np.intp)
            if intercept_groups.shape != (n,):
                raise EngineError("intercept_groups must have one code per area")
            if n_intercepts != int(intercept_groups.max()) + 1:
                raise EngineError("n_intercepts inconsistent with group codes")
        elif n_intercepts == 1:
            intercept_groups = np.zeros(n, dtype=np.intp)
        elif n_intercepts != 0:
            raise EngineError("n_intercepts > 1 requires intercept_groups")
        self.intercept_groups = intercept_groups
        self.n_intercepts = n_intercepts

        self.n_areas = n
        self.n_covariates = p
        q = n_intercepts
        self.m = q + p + 2 * n
        self.sl_intercept = slice(0, q)
        self.sl_beta = slice(q, q + p)
        self.sl_e = slice(q + p, q + p + n)
        self.sl_s = slice(q + p + n, self.m)

        self.vague_precision = float(vague_precision)
        self.icar_jitter = float(icar_jitter)

        P0 = np.zeros((self.m, self.m))
        fixed = q + p
        if fixed:
            P0[:fixed, :fixed] = np.eye(fixed) * self.vague_precision
        P0[self.sl_e, self.sl_e] = np.eye(n)
        P0[self.sl_s, self.sl_s] = Q_scaled + self.icar_jitter * np.eye(n)
        self.P0 = P0
        try:
            self._cho_P0 = cho_factor(P0, lower=True)
        except np.linalg.LinAlgError as exc:
            raise EngineError(f"prior precision not positive definite: {exc}") from None
        self.logdet_P0 = 2.0 * float(np.sum(np.log(np.diag(self._cho_P0[0]))))

        # one sum-to-zero row per component on the s block
        k = len(self.components)
        A = np.zeros((k, self.m))
        for r, comp in enumerate(self.components):
            for i in comp:
                A[r, self.sl_s.start + i] = 1.0
        if k and not np.all(np.any(A != 0, axis=1)):
            raise EngineError("zero constraint vector")
        self.A = A
        self.n_constraints = k
        # prior constraint normalizer, shared by every hyper point
        Y0 = cho_solve(self._cho_P0, A.T)
        S0 = A @ Y0
        sign, logdet_S0 = np.linalg.slogdet(S0)
        if k and sign <= 0:
            raise EngineError("singular prior constraint covariance")
        self.log_prior_constraint = (
            -0.5 * k * math.log(2.0 * math.pi) - 0.5 * logdet_S0 if k else 0.0
        )

    # -- hyper-dependent maps ------------------------------------------------

    def mix_coefficients(self, sigma: float, phi: float) -> tuple[float, float]:
        if sigma <= 0 or not 0.0 <= phi <= 1.0:
            raise EngineError(f"invalid BYM2 hyperparameters sigma={sigma}, phi={phi}")
        return sigma * math.sqrt(1.0 - phi), sigma * math.sqrt(phi)

    def linear_predictor(self, x: np.ndarray, sigma: float, phi: float) -> np.ndarray:
        ce, cs = self.mix_coefficients(sigma, phi)
        eta = ce * x[self.sl_e] + cs * x[self.sl_s]
        if self.n_intercepts:
            eta = eta + x[self.sl_intercept][self.intercept_groups]
        if self.X is not None:
            eta = eta + self.X @ x[self.sl_beta]
        return eta

    def adjoint(self, g: np.ndarray, sigma: float, phi: float) -> np.ndarray:
        """Map per-area values through the transpose of the design."""
        ce, cs = self.mix_coefficients(sigma, phi)
        out = np.zeros(self.m)
        if self.n_intercepts:
            np.add.at(out[self.sl_intercept], self.intercept_groups, g)
        if self.X is not None:
            out[self.sl_beta] = self.X.T @ g
        out[self.sl_e] = ce * g
        out[self.sl_s] = cs * g
        return out

    def design_matrix(self, sigma: float, phi: float) -> np.ndarray:
        ce, cs = self.mix_coefficients(sigma, phi)
        D = np.zeros((self.n_areas, self.m))
        if self.n_intercepts:
            D[np.arange(self.n_areas), self.intercept_groups] = 1.0
        if self.X is not None:
            D[:, self.sl_beta] = self.X
        D[:, self.sl_e] = ce * np.eye(self.n_areas)
        D[:, self.sl_s] = cs * np.eye(self.n_areas)
        return D

    def posterior_precision(
        self, W: np.ndarray, sigma: float, phi: float
    ) -> np.ndarray:
        """P0 + D^T diag(W) D assembled block-wise (W is a per-area weight)."""
        ce, cs = self.mix_coefficients(sigma, phi)
        P = self.P0.copy()
        n = self.n_areas
        q = self.n_intercepts
        ar = np.arange(n)

        if q:
            gsum = np.bincount(self.intercept_groups, weights=W, minlength=q)
            P[self.sl_intercept, self.sl_intercept] += np.diag(gsum)
        if self.X is not None:
            XW = self.X * W[:, None]
            P[self.sl_beta, self.sl_beta] += self.X.T @ XW
            if q:
                GX = np.zeros((q, self.n_covariates))
                np.add.at(GX, self.intercept_groups, XW)
                P[self.sl_intercept, self.sl_beta] += GX
                P[self.sl_beta, self.sl_intercept] += GX.T

        for sl, coef in ((self.sl_e, ce), (self.sl_s, cs)):
            if q:
                block = np.zeros((q, n))
                block[self.intercept_groups, ar] = coef * W
                P[self.sl_intercept, sl] += block
                P[sl, self.sl_intercept] += block.T
            if self.X is not None:
                P[self.sl_beta, sl] += coef * (self.X.T * W[None, :])
                P[sl, self.sl_beta] += coef * (self.X * W[:, None])

        idx_e = ar + self.sl_e.start
        idx_s = ar + self.sl_s.start
        P[idx_e, idx_e] += ce**2 * W
        P[idx_s, idx_s] += cs**2 * W
        P[idx_e, idx_s] += ce * cs * W
        P[idx_s, idx_e] += ce * cs * W
        return P


def bym2_prior_precision(
    sigma: float, phi: float, scaled_covariance: np.ndarray
) -> np.ndarray:
    """Implied prior precision of the mixed area effect b.

    Built as the pseudo-inverse of the mixed covariance
    sigma^2 ((1-phi) I + phi * C) with C the scaled structured covariance;
    at phi=0 this is the iid precision, at phi=1 the scaled intrinsic
    precision.
    """
    n = scaled_covariance.shape[0]
    cov = sigma**2 * ((1.0 - phi) * np.eye(n) + phi * scaled_covariance)
    w, V = np.linalg.eigh(cov)
    tol = 1e-10 * max(1.0, float(w.max()))
    inv = np.where(w > tol, 1.0 / np.where(w > tol, w, 1.0), 0.0)
    return (V * inv) @ V.T
