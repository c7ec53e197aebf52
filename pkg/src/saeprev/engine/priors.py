"""Hyperparameter priors: penalized-complexity priors for the random-effect
scale and the spatial proportion, and a logit-normal prior for the
beta-binomial overdispersion."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "PhiPCPrior",
    "PriorError",
    "logit_normal_logpdf",
    "pc_prior_phi",
    "pc_prior_sigma",
]


class PriorError(ValueError):
    """Prior parameters outside their domain or uncalibratable."""


def pc_prior_sigma(U: float, alpha: float):
    """Exponential prior on a standard deviation from the tail condition
    P(sigma > U) = alpha.

    Returns (rate, log_density) with rate = -ln(alpha)/U and log_density a
    function of sigma.
    """
    if not U > 0:
        raise PriorError(f"U must be positive, got {U}")
    if not 0.0 < alpha < 1.0:
        raise PriorError(f"alpha must be in (0,1), got {alpha}")
    rate = -math.log(alpha) / U

    def log_density(sigma):
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0):
            raise PriorError("sigma must be positive")
        out = math.log(rate) - rate * sigma
        return float(out) if np.isscalar(out) or out.shape == () else out

    return rate, log_density


def _kld_terms(gamma: np.ndarray, phi) -> np.ndarray:
    """KL divergence of the mixed covariance (1-phi)I + phi*diag(gamma)
    from the identity base model, as a function of phi."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    delta = gamma - 1.0
    t = 1.0 + phi[:, None] * delta[None, :]
    return 0.5 * np.sum(phi[:, None] * delta[None, :] - np.log(t), axis=1)


class PhiPCPrior:
    """Distance-based prior on the spatial proportion phi in (0,1).

    The distance from the non-spatial base model is d(phi) = sqrt(2*KLD(phi))
    with KLD computed from the eigenvalues `gamma` of the scaled structured
    covariance on the constrained subspace.  An exponential law on the
    distance is calibrated so that the trapezoid mass below 0.5 on the
    calibration grid equals `prob_mass`.
    """

    def __init__(
        self,
        gamma: np.ndarray,
        prob_mass: float = 2.0 / 3.0,
        grid: np.ndarray | None = None,
    ):
        gamma = np.asarray(gamma, dtype=float)
        if gamma.size == 0 or np.max(np.abs(gamma - 1.0)) < 1e-12:
            raise PriorError("degenerate spatial structure: all eigenvalues equal 1")
        if not 0.0 < prob_mass < 1.0:
            raise PriorError(f"prob_mass must be in (0,1), got {prob_mass}")
        self.gamma = gamma
        self.prob_mass = prob_mass
        self.grid = np.linspace(0.0, 1.0, 4097) if grid is None else np.asarray(grid, float)
        if self.grid[0] < 0 or self.grid[-1] > 1 or np.any(np.diff(self.grid) <= 0):
            raise PriorError("phi grid must be increasing within [0,1]")

        kld = _kld_terms(gamma, self.grid)
        self._dist = np.sqrt(2.0 * np.maximum(kld, 0.0))
        self._ddist = self._distance_derivative(self.grid)
        self.rate = self._calibrate()
        dens = self._unnormalized(self.rate)
        self._norm = np.trapezoid(dens, self.grid)
        self._log_density_grid = np.log(dens) - math.log(self._norm)

    def _distance_derivative(self, phi: np.ndarray) -> np.ndarray:
        delta = self.gamma - 1.0
        phi = np.atleast_1d(phi)
        t = 1.0 + phi[:, None] * delta[None, :]
        kld_prime = 0.5 * np.sum(delta[None, :] * (1.0 - 1.0 / t), axis=1)
        d = np.sqrt(2.0 * np.maximum(_kld_terms(self.gamma, phi), 0.0))
        small = d < 1e-10
        out = np.empty_like(d)
        out[~small] = kld_prime[~small] / d[~small]
        out[small] = math.sqrt(float(np.sum(delta**2)) / 2.0)
        return out

    def _unnormalized(self, rate: float) -> np.ndarray:
        return rate * np.exp(-rate * self._dist) * self._ddist

    def _mass_below(self, rate: float, cut: float = 0.5) -> float:
        dens = self._unnormalized(rate)
        total = np.trapezoid(dens, self.grid)
        g = self.grid
        if cut >= g[-1]:
            return 1.0
        k = int(np.searchsorted(g, cut, side="right"))
        mass = np.trapezoid(dens[:k], g[:k]) if k > 1 else 0.0
        if k > 0 and g[k - 1] < cut:  # partial trapezoid up to the cut
            f_cut = np.interp(cut, g, dens)
            mass += 0.5 * (dens[k - 1] + f_cut) * (cut - g[k - 1])
        return float(mass / total)

    def _calibrate(self) -> float:
        lo, hi = 1e-8, 1e8
        f = lambda lam: self._mass_below(lam) - self.prob_mass
        flo, fhi = f(lo), f(hi)
        if flo > 0:
            raise PriorError(
                "cannot calibrate: even a flat distance prior puts more than "
                f"{self.prob_mass:.3f} mass below 0.5"
            )
        if fhi < 0:
            raise PriorError("cannot calibrate: rate bracket exhausted")
        return float(brentq(f, lo, hi, xtol=1e-12, rtol=1e-14))

    def log_density_grid(self) -> np.ndarray:
        """Log density over the calibration grid, trapezoid-normalized to 1."""
        return self._log_density_grid.copy()

    def log_density(self, phi) -> float:
        """Interpolated log density at arbitrary phi in [0,1]."""
        return float(np.interp(phi, self.grid, self._log_density_grid))

    def log_density_transformed(self, t: float) -> float:
        """Log density of logit(phi) at t, including the Jacobian."""
        phi = 1.0 / (1.0 + math.exp(-t))
        return self.log_density(phi) + math.log(phi * (1.0 - phi))


def pc_prior_phi(
    gamma: np.ndarray, phi_grid: np.ndarray, prob_mass: float = 2.0 / 3.0
) -> np.ndarray:
    """Log-density of the spatial-proportion prior over `phi_grid`,
    calibrated on that same grid so the trapezoid mass below 0.5 equals
    `prob_mass`."""
    return PhiPCPrior(gamma, prob_mass=prob_mass, grid=phi_grid).log_density_grid()


def logit_normal_logpdf(t: float, mean: float = 0.0, sd: float = 1.5) -> float:
    """Normal log-density on the logit-transformed coordinate."""
    return -0.5 * ((t - mean) / sd) ** 2 - math.log(sd * math.sqrt(2.0 * math.pi))
