"""Approximate Bayesian inference for latent Gaussian area models:
PC priors, hyperparameter grids, exact Gaussian and Laplace conditional
fits, and reproducible posterior sampling."""

from .betabinom import betabinomial_logpmf, binomial_loglik_terms, cluster_loglik_terms
from .fits import (
    ClusterData,
    GaussianData,
    LaplaceDivergence,
    PointFit,
    gaussian_conditional_fit,
    laplace_fit,
)
from .grid import GridSettings, HyperGrid, build_hyper_grid
from .latent import EngineError, LatentModelSpec, bym2_prior_precision
from .posterior import PosteriorResult, sample_posterior
from .priors import (
    PhiPCPrior,
    PriorError,
    logit_normal_logpdf,
    pc_prior_phi,
    pc_prior_sigma,
)

__all__ = [
    "ClusterData",
    "EngineError",
    "GaussianData",
    "GridSettings",
    "HyperGrid",
    "LaplaceDivergence",
    "LatentModelSpec",
    "PhiPCPrior",
    "PointFit",
    "PosteriorResult",
    "PriorError",
    "betabinomial_logpmf",
    "binomial_loglik_terms",
    "build_hyper_grid",
    "bym2_prior_precision",
    "cluster_loglik_terms",
    "gaussian_conditional_fit",
    "laplace_fit",
    "logit_normal_logpdf",
    "pc_prior_phi",
    "pc_prior_sigma",
    "sample_posterior",
]
