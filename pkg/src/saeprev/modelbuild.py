"""Shared assembly of latent-model specs and hyper priors from a graph level."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CovariateTable
from .engine.latent import LatentModelSpec
from .engine.priors import PhiPCPrior, PriorError, logit_normal_logpdf, pc_prior_sigma
from .graph import AreaGraph, GraphError

__all__ = ["PriorSettings", "build_spec", "hyper_log_prior", "SIGMA_BRACKET", "PHI_BRACKET", "D_BRACKET"]

SIGMA_BRACKET = (-4.0, 2.5)   # log sigma
PHI_BRACKET = (-6.0, 6.0)     # logit phi
D_BRACKET = (-7.0, 2.0)       # logit d


@dataclass(frozen=True)
class PriorSettings:
    pc_sigma_u: float = 1.0
    pc_sigma_alpha: float = 0.01
    pc_phi_mass_below_half: float = 2.0 / 3.0
    logit_d_mean: float = 0.0
    logit_d_sd: float = 1.5


def build_spec(
    graph: AreaGraph,
    level: int,
    likelihood: str,
    covariates: CovariateTable | None = None,
    covariate_columns: tuple[str, ...] = (),
    nested: bool = False,
) -> tuple[LatentModelSpec, list[str]]:
    """Latent spec for one graph level, with structural warnings."""
    warnings: list[str] = []
    area_ids = graph.area_ids(level)
    try:
        Q = graph.scaled_precision(level)
    except GraphError:
        Q = np.zeros((len(area_ids), len(area_ids)))
        warnings.append(
            f"level {level} has no adjacency structure; the spatial proportion is uninformative"
        )
    comps = graph.component_indices(level)
    n_singletons = sum(1 for c in comps if len(c) == 1)
    if n_singletons and len(comps) > n_singletons:
        warnings.append(
            f"{n_singletons} isolated area(s) at level {level} carry no structured effect"
        )

    X = None
    names: tuple[str, ...] = ()
    if covariate_columns:
        if covariates is None:
            raise ValueError("covariate columns requested but no covariate table supplied")
        if covariates.level != level:
            raise ValueError(
                f"covariate table is for level {covariates.level}, fit is at level {level}"
            )
        names = tuple(covariate_columns)
        X = covariates.matrix(area_ids, names)

    groups = None
    n_intercepts = 1
    if nested:
        if level < 2:
            raise ValueError("nested intercepts require level >= 2")
        admin1_ids = graph.area_ids(1)
        a1_index = {aid: k for k, aid in enumerate(admin1_ids)}
        groups = np.array(
            [a1_index[graph.ancestor_at(aid, 1)] for aid in area_ids], dtype=np.intp
        )
        used = np.unique(groups)
        remap = {int(old): new for new, old in enumerate(used)}
        groups = np.array([remap[int(g)] for g in groups], dtype=np.intp)
        n_intercepts = len(used)

    spec = LatentModelSpec(
        area_ids=area_ids,
        Q_scaled=Q,
        components=comps,
        X=X,
        covariate_names=names,
        intercept_groups=groups,
        n_intercepts=n_intercepts,
        likelihood=likelihood,
        level=level,
    )
    return spec, warnings


def hyper_log_prior(
    graph: AreaGraph,
    level: int,
    settings: PriorSettings,
    with_overdispersion: bool,
):
    """Joint log prior over the transformed hyper coordinates.

    Axes are (log sigma, logit phi[, logit d]).  The sigma prior is the
    exponential tail prior, phi gets the distance-based prior from the
    level's scaled structure (uniform fallback when the structure is
    degenerate), and logit d is normal.
    """
    rate, _ = pc_prior_sigma(settings.pc_sigma_u, settings.pc_sigma_alpha)
    try:
        gamma = graph.structure_eigenvalues(level)
        phi_prior = PhiPCPrior(gamma, prob_mass=settings.pc_phi_mass_below_half)
        phi_logpdf_t = phi_prior.log_density_transformed
    except (PriorError, GraphError):
        def phi_logpdf_t(t: float) -> float:  # uniform on phi, with Jacobian
            phi = 1.0 / (1.0 + math.exp(-t))
            return math.log(phi * (1.0 - phi))

    def log_prior(t: np.ndarray) -> float:
        t0, t1 = float(t[0]), float(t[1])
        lp = math.log(rate) - rate * math.exp(t0) + t0  # exponential in sigma, log scale
        lp += phi_logpdf_t(t1)
        if with_overdispersion:
            lp += logit_normal_logpdf(float(t[2]), settings.logit_d_mean, settings.logit_d_sd)
        return lp

    return log_prior
