"""Area-level smoothing of direct estimates.

The logit-transformed weighted estimates enter a Gaussian likelihood with
their delta-method variances treated as known; the latent mean combines an
intercept, optional area covariates and the mixed spatial effect.  Areas
flagged no_data or low_information are excluded from the likelihood and
predicted from the latent field, carrying an `extrapolated` flag downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import CovariateTable
from .direct import FLAG_OK, DirectEstimates
from .engine.fits import GaussianData, gaussian_conditional_fit
from .engine.grid import GridSettings, build_hyper_grid
from .engine.posterior import PosteriorResult
from .gate import METHOD_AREA, GateBlockedError, evaluate_gate
from .graph import AreaGraph
from .modelbuild import PHI_BRACKET, SIGMA_BRACKET, PriorSettings, build_spec, hyper_log_prior

__all__ = ["AreaModelOptions", "fit_area_model", "gaussian_data_from_direct"]


def gaussian_data_from_direct(direct: DirectEstimates, area_ids) -> GaussianData:
    """Logit-scale observations with known variances for the usable areas."""
    obs_idx, z, V = [], [], []
    for i, aid in enumerate(area_ids):
        entry = direct.areas[aid]
        if entry.flag == FLAG_OK:
            obs_idx.append(i)
            z.append(math.log(entry.p_hat / (1.0 - entry.p_hat)))
            V.append(entry.logit_var)
    return GaussianData(
        obs_idx=np.array(obs_idx, dtype=np.intp), z=np.array(z), V=np.array(V)
    )


@dataclass(frozen=True)
class AreaModelOptions:
    level: int
    use_covariates: bool = False
    covariate_columns: tuple[str, ...] = ()
    priors: PriorSettings = field(default_factory=PriorSettings)
    grid: GridSettings = field(default_factory=GridSettings)
    seed: int = 0

    def provenance(self) -> dict:
        return {
            "level": self.level,
            "use_covariates": self.use_covariates,
            "covariate_columns": list(self.covariate_columns),
            "pc_sigma_u": self.priors.pc_sigma_u,
            "pc_sigma_alpha": self.priors.pc_sigma_alpha,
            "pc_phi_mass_below_half": self.priors.pc_phi_mass_below_half,
            "seed": self.seed,
        }


def fit_area_model(
    direct: DirectEstimates,
    graph: AreaGraph,
    covariates: CovariateTable | None = None,
    opts: AreaModelOptions | None = None,
) -> PosteriorResult:
    """Fit the hierarchical model on the usable direct estimates.

    Requires variance-complete direct estimates at the option level and a
    passing sparsity gate; raises GateBlockedError otherwise.
    """
    if opts is None:
        raise ValueError("AreaModelOptions required")
    level = opts.level
    if direct.level != level:
        raise ValueError(f"direct estimates are for level {direct.level}, not {level}")
    if not direct.variance_complete:
        raise ValueError("area model needs variance-complete direct estimates")

    report = evaluate_gate(direct, level)
    if report.verdict(METHOD_AREA) != "allow":
        raise GateBlockedError(report, METHOD_AREA)

    columns = opts.covariate_columns if opts.use_covariates else ()
    spec, warnings = build_spec(
        graph, level, likelihood="gaussian", covariates=covariates, covariate_columns=columns
    )

    area_ids = spec.area_ids
    data = gaussian_data_from_direct(direct, area_ids)

    log_prior = hyper_log_prior(graph, level, opts.priors, with_overdispersion=False)

    def fit_fn(t):
        hyper = {"sigma": math.exp(float(t[0])), "phi": 1.0 / (1.0 + math.exp(-float(t[1])))}
        return gaussian_conditional_fit(spec, data, hyper)

    grid, fits, diag = build_hyper_grid(
        fit_fn,
        log_prior,
        axis_names=("log_sigma", "logit_phi"),
        init=np.array([math.log(0.5), 0.0]),
        brackets=(SIGMA_BRACKET, PHI_BRACKET),
        settings=opts.grid,
    )
    diag["warnings"] = list(diag.get("warnings", [])) + warnings
    diag["excluded_area_ids"] = [
        aid for aid in area_ids if direct.areas[aid].flag != FLAG_OK
    ]
    extrapolated = [direct.areas[aid].flag != FLAG_OK for aid in area_ids]
    admin1 = tuple(graph.ancestor_at(aid, min(1, level)) for aid in area_ids)
    return PosteriorResult(
        spec=spec,
        grid=grid,
        fits=fits,
        method="area_level",
        options=opts.provenance(),
        seed=opts.seed,
        extrapolated=extrapolated,
        diagnostics=diag,
        admin1_ancestor=admin1,
    )
