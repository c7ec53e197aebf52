"""Conditional fits of the latent field at a fixed hyperparameter point.

The Gaussian case (area-level likelihood with known variances) is exact
conjugate algebra.  The count likelihoods go through Newton iteration with
step halving to the posterior mode, then a Gaussian approximation with the
curvature there.  Both paths finish identically: sum-to-zero constraints are
imposed by conditioning-by-kriging and the evidence gets the matching
correction

    log p(data | Ax=0) = log p(data) + log N(0; A mu, A Sigma A^T)
                                     - log N(0; 0, A Sigma0 A^T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit

from .betabinom import binomial_loglik_terms, cluster_loglik_terms
from .latent import BETA_BINOMIAL, BINOMIAL, GAUSSIAN, EngineError, LatentModelSpec

__all__ = [
    "ClusterData",
    "GaussianData",
    "LaplaceDivergence",
    "PointFit",
    "gaussian_conditional_fit",
    "laplace_fit",
]

LOG2PI = math.log(2.0 * math.pi)

NEWTON_MAX_ITER = 100
NEWTON_GRAD_TOL = 1e-8
NEWTON_STEP_TOL = 1e-10
CURVATURE_FLOOR = 1e-12


class LaplaceDivergence(EngineError):
    """Newton iteration failed to converge."""

    def __init__(self, n_iter: int, grad_norm: float):
        self.n_iter = n_iter
        self.grad_norm = grad_norm
        super().__init__(
            f"mode search did not converge after {n_iter} iterations "
            f"(max |gradient| = {grad_norm:.3e})"
        )


@dataclass(frozen=True)
class GaussianData:
    """Observed transformed estimates with known variances on a subset of areas."""

    obs_idx: np.ndarray  # indices of areas carrying an observation
    z: np.ndarray        # observed values, len == len(obs_idx)
    V: np.ndarray        # known sampling variances, positive

    def __post_init__(self):
        if not (len(self.obs_idx) == len(self.z) == len(self.V)):
            raise EngineError("gaussian data arrays must align")
        if np.any(np.asarray(self.V) <= 0):
            raise EngineError("observation variances must be positive")


@dataclass(frozen=True)
class ClusterData:
    """Cluster counts mapped to area indices at the modeled level."""

    area_idx: np.ndarray
    y: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        if not (len(self.area_idx) == len(self.y) == len(self.n)):
            raise EngineError("cluster data arrays must align")


@dataclass
class PointFit:
    """Gaussian approximation of the latent posterior at one hyper point."""

    hyper: dict[str, float]
    mean_u: np.ndarray          # unconstrained posterior mean / mode
    mean: np.ndarray            # constrained posterior mean
    obs_weight: np.ndarray      # per-area curvature of the data term (n_areas,)
    log_evidence: float         # constrained
    n_iter: int = 0
    grad_norm: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def _finish(
    spec: LatentModelSpec,
    hyper: dict[str, float],
    P: np.ndarray,
    mean_u: np.ndarray,
    W_area: np.ndarray,
    log_ev_unconstrained: float,
    n_iter: int = 0,
    grad_norm: float = 0.0,
    cho=None,
) -> PointFit:
    if cho is None:
        try:
            cho = cho_factor(P, lower=True)
        except np.linalg.LinAlgError as exc:
            raise EngineError(f"singular posterior precision: {exc}") from None
    log_ev = log_ev_unconstrained
    mean = mean_u
    if spec.n_constraints:
        Y = cho_solve(cho, spec.A.T)
        S = spec.A @ Y
        sign, logdet_S = np.linalg.slogdet(S)
        if sign <= 0:
            raise EngineError("singular constraint covariance")
        Amu = spec.A @ mean_u
        quad = float(Amu @ np.linalg.solve(S, Amu))
        log_cond = -0.5 * spec.n_constraints * LOG2PI - 0.5 * logdet_S - 0.5 * quad
        log_ev = log_ev_unconstrained + log_cond - spec.log_prior_constraint
        mean = mean_u - Y @ np.linalg.solve(S, Amu)
    return PointFit(
        hyper=dict(hyper),
        mean_u=mean_u,
        mean=mean,
        obs_weight=W_area,
        log_evidence=float(log_ev),
        n_iter=n_iter,
        grad_norm=grad_norm,
    )


def gaussian_conditional_fit(
    spec: LatentModelSpec, data: GaussianData, hyper: dict[str, float]
) -> PointFit:
    """Exact conjugate Gaussian posterior under the sum-to-zero constraints."""
    if spec.likelihood != GAUSSIAN:
        raise EngineError(f"spec likelihood is {spec.likelihood!r}, not gaussian")
    sigma, phi = hyper["sigma"], hyper["phi"]
    n = spec.n_areas
    W = np.zeros(n)
    zfull = np.zeros(n)
    W[data.obs_idx] = 1.0 / data.V
    zfull[data.obs_idx] = data.z

    P = spec.posterior_precision(W, sigma, phi)
    rhs = spec.adjoint(W * zfull, sigma, phi)
    try:
        cho = cho_factor(P, lower=True)
    except np.linalg.LinAlgError as exc:
        raise EngineError(f"singular posterior precision: {exc}") from None
    mean_u = cho_solve(cho, rhs)
    logdet_P = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))

    n_obs = len(data.obs_idx)
    log_ev = (
        -0.5 * n_obs * LOG2PI
        - 0.5 * float(np.sum(np.log(data.V)))
        - 0.5 * float(np.sum(data.z**2 / data.V))
        + 0.5 * spec.logdet_P0
        - 0.5 * logdet_P
        + 0.5 * float(mean_u @ rhs)
    )
    return _finish(spec, hyper, P, mean_u, W, log_ev)


def _data_terms(spec: LatentModelSpec, data, eta: np.ndarray, hyper):
    """Aggregate per-cluster likelihood, gradient and curvature to areas."""
    n = spec.n_areas
    if spec.likelihood == GAUSSIAN:
        W = np.zeros(n)
        g = np.zeros(n)
        W[data.obs_idx] = 1.0 / data.V
        g[data.obs_idx] = (data.z - eta[data.obs_idx]) / data.V
        ll = float(
            np.sum(
                -0.5 * LOG2PI
                - 0.5 * np.log(data.V)
                - 0.5 * (data.z - eta[data.obs_idx]) ** 2 / data.V
            )
        )
        return ll, g, W
    p = expit(eta[data.area_idx])
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    if spec.likelihood == BETA_BINOMIAL:
        ll_c, dl_c, d2l_c = cluster_loglik_terms(data.y, data.n, p, hyper["d"])
    elif spec.likelihood == BINOMIAL:
        ll_c, dl_c, d2l_c = binomial_loglik_terms(data.y, data.n, p)
    else:
        raise EngineError(f"unsupported likelihood {spec.likelihood!r}")
    if not np.all(np.isfinite(ll_c)):
        raise EngineError("non-finite likelihood term")
    g = np.bincount(data.area_idx, weights=dl_c, minlength=n)
    W = -np.bincount(data.area_idx, weights=d2l_c, minlength=n)
    return float(np.sum(ll_c)), g, W


def _project_to_constraints(spec: LatentModelSpec, x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {Ax = 0}: remove component means of s."""
    if not spec.n_constraints:
        return x
    out = x.copy()
    s = out[spec.sl_s]
    for comp in spec.components:
        idx = list(comp)
        s[idx] -= s[idx].mean()
    return out


def laplace_fit(
    spec: LatentModelSpec,
    data,
    hyper: dict[str, float],
    x0: np.ndarray | None = None,
    max_iter: int = NEWTON_MAX_ITER,
) -> PointFit:
    """Newton mode search plus Gaussian curvature approximation.

    The iteration maximizes log prior + log likelihood on the constraint
    manifold: every Newton direction is kriging-projected into the null
    space of A, so the sum-to-zero structure holds at the mode rather than
    being imposed afterwards.  Converges when the gradient's manifold
    component drops below 1e-8 in max-norm or the accepted step is shorter
    than 1e-10; raises LaplaceDivergence otherwise.
    """
    sigma, phi = hyper["sigma"], hyper["phi"]
    x = np.zeros(spec.m) if x0 is None else np.asarray(x0, dtype=float).copy()
    x = _project_to_constraints(spec, x)

    def objective(xv):
        eta = spec.linear_predictor(xv, sigma, phi)
        ll, g, W = _data_terms(spec, data, eta, hyper)
        quad = -0.5 * float(xv @ (spec.P0 @ xv))
        return ll + quad, g, W

    def newton_direction(cho, grad):
        step = cho_solve(cho, grad)
        if spec.n_constraints:
            Y = cho_solve(cho, spec.A.T)
            S = spec.A @ Y
            step = step - Y @ np.linalg.solve(S, spec.A @ step)
        return step

    def manifold_grad_norm(grad):
        # the gradient component along the constraint normals is inactive
        return float(np.max(np.abs(_project_to_constraints(spec, grad))))

    f, g_area, W_area = objective(x)
    grad = spec.adjoint(g_area, sigma, phi) - spec.P0 @ x
    grad_norm = manifold_grad_norm(grad)
    it = 0
    converged = grad_norm < NEWTON_GRAD_TOL
    while not converged:
        if it >= max_iter:
            raise LaplaceDivergence(it, grad_norm)
        it += 1
        Wpos = np.maximum(W_area, CURVATURE_FLOOR)
        P = spec.posterior_precision(Wpos, sigma, phi)
        try:
            cho = cho_factor(P, lower=True)
        except np.linalg.LinAlgError as exc:
            raise EngineError(f"Newton system singular: {exc}") from None
        step = newton_direction(cho, grad)
        t = 1.0
        accepted = False
        for _ in range(40):
            trial = x + t * step
            try:
                f_try, g_try, W_try = objective(trial)
            except (EngineError, FloatingPointError):
                f_try = -np.inf
            if np.isfinite(f_try) and f_try >= f - 1e-12 * max(1.0, abs(f)):
                x, f, g_area, W_area = trial, f_try, g_try, W_try
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise LaplaceDivergence(it, grad_norm)
        grad = spec.adjoint(g_area, sigma, phi) - spec.P0 @ x
        grad_norm = manifold_grad_norm(grad)
        converged = (
            grad_norm < NEWTON_GRAD_TOL
            or t * float(np.linalg.norm(step)) < NEWTON_STEP_TOL
        )

    Wfinal = np.maximum(W_area, CURVATURE_FLOOR)
    P = spec.posterior_precision(Wfinal, sigma, phi)
    cho = cho_factor(P, lower=True)
    logdet_P = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
    quad = 0.5 * float(x @ (spec.P0 @ x))
    ll = f + quad  # objective = loglik - quad, both already at the mode
    log_ev = ll - quad + 0.5 * spec.logdet_P0 - 0.5 * logdet_P
    fit = _finish(
        spec, hyper, P, x, Wfinal, log_ev, n_iter=it, grad_norm=grad_norm, cho=cho
    )
    return fit
