"""Unit-level model on cluster counts.

Cluster totals follow the overdispersed binomial with a shared area-level
linear predictor, so every cluster in an area sees the same prevalence
p_i = expit(eta_i).  Design weights do not enter the likelihood; the audit
operation reports where that assumption is risky instead of hiding it.
The optional nested mode swaps the global intercept for one fixed effect
per admin-1 region, smoothing only within regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import AnalysisDataset, CovariateTable
from .engine.fits import ClusterData, laplace_fit
from .engine.grid import GridSettings, build_hyper_grid
from .engine.posterior import PosteriorResult
from .graph import AreaGraph
from .modelbuild import (
    D_BRACKET,
    PHI_BRACKET,
    SIGMA_BRACKET,
    PriorSettings,
    build_spec,
    hyper_log_prior,
)

__all__ = ["UnitModelOptions", "fit_unit_model", "survey_weight_ignored_audit"]


@dataclass(frozen=True)
class UnitModelOptions:
    level: int
    nested: bool = False
    use_covariates: bool = False
    covariate_columns: tuple[str, ...] = ()
    priors: PriorSettings = field(default_factory=PriorSettings)
    grid: GridSettings = field(default_factory=GridSettings)
    seed: int = 0

    def __post_init__(self):
        if self.nested and self.level < 2:
            raise ValueError("nested mode requires level >= 2")

    def provenance(self) -> dict:
        return {
            "level": self.level,
            "nested": self.nested,
            "use_covariates": self.use_covariates,
            "covariate_columns": list(self.covariate_columns),
            "pc_sigma_u": self.priors.pc_sigma_u,
            "pc_sigma_alpha": self.priors.pc_sigma_alpha,
            "pc_phi_mass_below_half": self.priors.pc_phi_mass_below_half,
            "logit_d_mean": self.priors.logit_d_mean,
            "logit_d_sd": self.priors.logit_d_sd,
            "seed": self.seed,
        }


def fit_unit_model(
    ds: AnalysisDataset,
    graph: AreaGraph,
    covariates: CovariateTable | None = None,
    opts: UnitModelOptions | None = None,
) -> PosteriorResult:
    """Fit the cluster-level model and integrate over (sigma, phi, d).

    Areas without clusters are predicted from the latent field and flagged
    extrapolated.  An all-zero outcome attaches a warning but still fits.
    """
    if opts is None:
        raise ValueError("UnitModelOptions required")
    level = opts.level
    ds.require_level(level)

    area_idx, w, n, y = ds.arrays(level)
    usable = n > 0
    if not np.any(usable):
        raise ValueError("dataset has no clusters with trials")
    data = ClusterData(
        area_idx=area_idx[usable], y=y[usable], n=n[usable]
    )

    columns = opts.covariate_columns if opts.use_covariates else ()
    spec, warnings = build_spec(
        graph,
        level,
        likelihood="beta_binomial",
        covariates=covariates,
        covariate_columns=columns,
        nested=opts.nested,
    )
    if float(np.sum(data.y)) == 0.0:
        warnings.append("all cluster outcomes are zero at this level; estimates shrink to the prior")

    log_prior = hyper_log_prior(graph, level, opts.priors, with_overdispersion=True)

    warm = {"x": None}

    def fit_fn(t):
        hyper = {
            "sigma": math.exp(float(t[0])),
            "phi": 1.0 / (1.0 + math.exp(-float(t[1]))),
            "d": 1.0 / (1.0 + math.exp(-float(t[2]))),
        }
        fit = laplace_fit(spec, data, hyper, x0=warm["x"])
        warm["x"] = fit.mean_u
        return fit

    grid, fits, diag = build_hyper_grid(
        fit_fn,
        log_prior,
        axis_names=("log_sigma", "logit_phi", "logit_d"),
        init=np.array([math.log(0.5), 0.0, math.log(0.1 / 0.9)]),
        brackets=(SIGMA_BRACKET, PHI_BRACKET, D_BRACKET),
        settings=opts.grid,
    )
    diag["warnings"] = list(diag.get("warnings", [])) + warnings
    diag["newton_iterations"] = [f.n_iter for f in fits]

    counts = np.bincount(data.area_idx, minlength=spec.n_areas)
    extrapolated = [int(c) == 0 for c in counts]
    admin1 = tuple(graph.ancestor_at(aid, min(1, level)) for aid in spec.area_ids)
    return PosteriorResult(
        spec=spec,
        grid=grid,
        fits=fits,
        method="unit_level",
        options=opts.provenance(),
        seed=opts.seed,
        extrapolated=extrapolated,
        diagnostics=diag,
        admin1_ancestor=admin1,
    )


def survey_weight_ignored_audit(
    ds: AnalysisDataset, level: int, threshold: float = 0.5
) -> dict[str, dict]:
    """Per-area coefficient of variation of the design weights.

    The unit-level likelihood ignores weights; areas whose weights vary more
    than `threshold` (CV = sd/mean) are flagged so users can see where an
    unweighted model is risky.  Areas without clusters are absent.
    """
    ds.require_level(level)
    area_idx, w, n, _ = ds.arrays(level)
    ids = ds.graph.area_ids(level)
    out: dict[str, dict] = {}
    for i, aid in enumerate(ids):
        wi = w[area_idx == i]
        if wi.size == 0:
            continue
        mean = float(wi.mean())
        cv = float(wi.std() / mean) if mean > 0 else float("inf")
        out[aid] = {"cv": cv, "n_clusters": int(wi.size), "flagged": cv > threshold}
    return out
