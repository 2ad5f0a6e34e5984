"""Random forest regressor built on the exact CART trees.

Each tree sees a bootstrap sample (same size as the training set,
drawn with replacement) and evaluates ceil(sqrt(p)) features per node.
The forest prediction is the unweighted mean over trees. One global
per-feature presort is shared by all trees; each tree expands it with
its bootstrap multiplicities instead of re-sorting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import LearnerParams
from .tree import Tree, _expand_bootstrap, build_tree_presorted, presort


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    tree_seeds: tuple[int, ...]
    n_features: int
    feature_subset_size: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got {X.shape}")
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.predict(X)
        acc /= len(self.trees)
        return acc


def fit_random_forest(X, y, params: LearnerParams | None = None,
                      seed: int = 0) -> ForestModel:
    """Fit a random forest on (X, y).

    The per-node feature subset defaults to ceil(sqrt(p)). With
    n_trees=1 bootstrapping is disabled, so the result equals the
    plain full-feature-order tree fit on the whole sample.
    """
    if params is None:
        params = LearnerParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X shape {X.shape} does not match y shape {y.shape}")
    n, p = X.shape
    if n == 0:
        raise ValueError("empty training set")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in training data")
    n_trees = params.rf_n_trees
    if params.rf_feature_subset_size is None:
        mtry = max(1, math.ceil(math.sqrt(p)))
    else:
        mtry = params.rf_feature_subset_size
    if mtry > p:
        raise ValueError(f"feature subset size {mtry} exceeds {p} features")

    XT = np.ascontiguousarray(X.T)
    order0 = presort(XT)
    trees = []
    tree_seeds = []
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), t]))
        node_seed = int(rng.integers(0, 2**63 - 1))
        tree_seeds.append(node_seed)
        if n_trees == 1:
            sidx = order0.copy()
        else:
            counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
            sidx = _expand_bootstrap(order0, counts.astype(np.int64), n)
        trees.append(build_tree_presorted(
            XT, y, sidx, mtry, params.rf_min_samples_leaf,
            params.rf_max_depth, node_seed))
    return ForestModel(trees=tuple(trees), tree_seeds=tuple(tree_seeds),
                       n_features=p, feature_subset_size=mtry, seed=int(seed))
