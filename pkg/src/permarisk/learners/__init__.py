"""Native regression learners: elastic net, CART, forest, GBM, ridge."""

from __future__ import annotations

import numpy as np

from .forest import ForestModel, fit_random_forest
from .gbm import GbmModel, fit_hist_gbm
from .linear import (
    LinearModel,
    elastic_net_objective,
    fit_elastic_net,
    fit_elastic_net_cv,
    fit_ridge,
)
from .params import LearnerParams
from .tree import Tree, fit_tree

__all__ = [
    "LinearModel", "Tree", "ForestModel", "GbmModel", "LearnerParams",
    "fit_elastic_net", "fit_elastic_net_cv", "fit_ridge", "fit_tree",
    "fit_random_forest", "fit_hist_gbm", "elastic_net_objective", "predict",
]

_MODEL_TYPES = (LinearModel, Tree, ForestModel, GbmModel)


def predict(model, X: np.ndarray) -> np.ndarray:
    """Predict with any fitted model; validates the column count."""
    if not isinstance(model, _MODEL_TYPES):
        raise TypeError(f"not a fitted model: {type(model).__name__}")
    return model.predict(np.asarray(X, dtype=np.float64))
