"""Subnational prevalence estimation from stratified cluster surveys.

Three estimation routes over a shared area graph: design-based weighted
estimates, area-level smoothing of those estimates, and a unit-level
overdispersed-binomial model, with grid-plus-Laplace Bayesian inference,
data-sparsity gating and decision-support summaries.
"""

__version__ = "0.1.0"

from .area_model import AreaModelOptions, fit_area_model
from .data import (
    AnalysisDataset,
    ClusterRecord,
    CovariateTable,
    DatasetError,
    DatasetMetadata,
    cluster_counts,
    load_covariates,
    load_dataset,
)
from .direct import (
    DirectEstimates,
    design_variance,
    hajek,
    national_consistency_check,
)
from .gate import GateBlockedError, GateReport, evaluate_gate
from .graph import AreaGraph, GraphError, build_graph, connected_components, icar_scale
from .summaries import (
    AreaSummary,
    RidgeSelection,
    SummaryOptions,
    exceedance,
    ridge_data,
    scatter_data,
    summarize,
    tabulate,
    tabulation_csv,
)
from .synthetic import SyntheticDesignConfig, generate_synthetic, synthetic_graph
from .unit_model import UnitModelOptions, fit_unit_model, survey_weight_ignored_audit

__all__ = [
    "AnalysisDataset",
    "AreaGraph",
    "AreaModelOptions",
    "AreaSummary",
    "ClusterRecord",
    "CovariateTable",
    "DatasetError",
    "DatasetMetadata",
    "DirectEstimates",
    "GateBlockedError",
    "GateReport",
    "GraphError",
    "RidgeSelection",
    "SummaryOptions",
    "SyntheticDesignConfig",
    "UnitModelOptions",
    "__version__",
    "build_graph",
    "cluster_counts",
    "connected_components",
    "design_variance",
    "evaluate_gate",
    "exceedance",
    "fit_area_model",
    "fit_unit_model",
    "generate_synthetic",
    "hajek",
    "icar_scale",
    "load_covariates",
    "load_dataset",
    "national_consistency_check",
    "ridge_data",
    "scatter_data",
    "summarize",
    "survey_weight_ignored_audit",
    "synthetic_graph",
    "tabulate",
    "tabulation_csv",
]
