"""Hyperparameter bundle shared by the base learners."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LearnerParams:
    """Per-learner hyperparameters with desk-scale defaults."""

    rf_n_trees: int = 10
    rf_max_depth: int | None = None          # None = unlimited
    rf_min_samples_leaf: int = 5
    rf_feature_subset_size: int | None = None  # None = ceil(sqrt(p))

    gbm_n_iterations: int = 200
    gbm_learning_rate: float = 0.1
    gbm_max_depth: int = 6
    gbm_max_bins: int = 256
    gbm_min_samples_leaf: int = 20

    en_l1_ratio: float = 0.5
    en_lambda_grid: tuple[float, ...] = (0.001, 0.01, 0.1, 1.0)
    en_tol: float = 1e-5
    en_max_iter: int = 500

    ridge_lambda: float = 1.0

    def __post_init__(self) -> None:
        if self.rf_n_trees < 1:
            raise ValueError(f"rf_n_trees must be >= 1, got {self.rf_n_trees}")
        if self.rf_max_depth is not None and self.rf_max_depth < 1:
            raise ValueError(f"rf_max_depth must be >= 1 or None, got {self.rf_max_depth}")
        if self.rf_min_samples_leaf < 1:
            raise ValueError(f"rf_min_samples_leaf must be >= 1, got {self.rf_min_samples_leaf}")
        if self.rf_feature_subset_size is not None and self.rf_feature_subset_size < 1:
            raise ValueError("rf_feature_subset_size must be >= 1 or None, "
                             f"got {self.rf_feature_subset_size}")
        if self.gbm_n_iterations < 0:
            raise ValueError(f"gbm_n_iterations must be >= 0, got {self.gbm_n_iterations}")
        if not self.gbm_learning_rate > 0:
            raise ValueError(f"gbm_learning_rate must be > 0, got {self.gbm_learning_rate}")
        if self.gbm_max_depth < 1:
            raise ValueError(f"gbm_max_depth must be >= 1, got {self.gbm_max_depth}")
        if not (2 <= self.gbm_max_bins <= 256):
            raise ValueError(f"gbm_max_bins must be in [2, 256], got {self.gbm_max_bins}")
        if self.gbm_min_samples_leaf < 1:
            raise ValueError(f"gbm_min_samples_leaf must be >= 1, got {self.gbm_min_samples_leaf}")
        if not (0.0 <= self.en_l1_ratio <= 1.0):
            raise ValueError(f"en_l1_ratio must be in [0, 1], got {self.en_l1_ratio}")
        if len(self.en_lambda_grid) == 0 or any(lam < 0 for lam in self.en_lambda_grid):
            raise ValueError(f"en_lambda_grid must be non-empty and >= 0, got {self.en_lambda_grid}")
        if not self.en_tol > 0:
            raise ValueError(f"en_tol must be > 0, got {self.en_tol}")
        if self.en_max_iter < 1:
            raise ValueError(f"en_max_iter must be >= 1, got {self.en_max_iter}")
        if self.ridge_lambda < 0:
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
