"""permarisk: hybrid physics-ML permafrost projection and risk assessment."""

__version__ = "0.1.0"

from .config import RunConfig, config_from_dict, config_hash, load_config
from .data_io import SynthConfig, generate_synthetic, load_dataset, write_dataset
from .domain import Dataset, ScenarioSpec
from .features import FeatureMatrix, build_feature_matrix, impute_missing
from .learners import (
    ForestModel,
    GbmModel,
    LearnerParams,
    LinearModel,
    Tree,
    fit_elastic_net,
    fit_elastic_net_cv,
    fit_hist_gbm,
    fit_random_forest,
    fit_ridge,
    fit_tree,
    predict,
)
from .risk import (
    RiskAssessment,
    assess_risk,
    classify_risk,
    latitudinal_profile,
    quantile,
    risk_score,
    uncertainty_quantiles,
)
from .scenario import (
    SCENARIO_CATALOG,
    ProjectionResult,
    build_scenario_features,
    hybrid_project,
    physical_delta,
    physical_sensitivity_weight,
    summarize_scenario,
)
from .stacking import (
    StackedModel,
    assign_spatial_folds,
    fit_stacked_ensemble,
    generate_oof_predictions,
    load_stacked_model,
    predict_with_uncertainty,
    save_stacked_model,
)
from .validation import (
    compute_metrics,
    random_split_baseline,
    spatial_cv,
    temporal_cv,
)

__all__ = [
    "Dataset",
    "FeatureMatrix",
    "ForestModel",
    "GbmModel",
    "LearnerParams",
    "LinearModel",
    "ProjectionResult",
    "RiskAssessment",
    "RunConfig",
    "SCENARIO_CATALOG",
    "ScenarioSpec",
    "StackedModel",
    "SynthConfig",
    "Tree",
    "assess_risk",
    "assign_spatial_folds",
    "build_feature_matrix",
    "build_scenario_features",
    "classify_risk",
    "compute_metrics",
    "config_from_dict",
    "config_hash",
    "fit_elastic_net",
    "fit_elastic_net_cv",
    "fit_hist_gbm",
    "fit_random_forest",
    "fit_ridge",
    "fit_stacked_ensemble",
    "fit_tree",
    "generate_oof_predictions",
    "generate_synthetic",
    "hybrid_project",
    "impute_missing",
    "latitudinal_profile",
    "load_config",
    "load_dataset",
    "load_stacked_model",
    "physical_delta",
    "physical_sensitivity_weight",
    "predict",
    "predict_with_uncertainty",
    "quantile",
    "random_split_baseline",
    "risk_score",
    "save_stacked_model",
    "spatial_cv",
    "summarize_scenario",
    "temporal_cv",
    "uncertainty_quantiles",
    "write_dataset",
]
