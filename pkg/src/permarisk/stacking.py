"""Two-stage stacked ensemble with spatially grouped out-of-fold training.

Stage one trains the three base regressors (random forest, histogram
GBM, elastic net) per spatial fold and collects predictions for the
held-out fold, so every row's out-of-fold prediction comes from models
that never saw its location. Stage two fits a ridge meta-learner on
the three OOF columns, then refits each base model on the complete
training data for deployment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_io import substream, write_table
from .domain import LocationKey
from .features import FeatureMatrix
from .learners import (
    ForestModel,
    GbmModel,
    LearnerParams,
    LinearModel,
    fit_elastic_net_cv,
    fit_hist_gbm,
    fit_random_forest,
    fit_ridge,
)
from .learners.serialize import FORMAT_VERSION, model_from_dict, model_to_dict

BASE_MODEL_ORDER = ("forest", "gbm", "elastic_net")
DEFAULT_SAMPLE_CAP = 200_000


@dataclass(frozen=True)
class FoldAssignment:
    """Location → fold id map over k spatially contiguous folds."""

    mapping: dict[LocationKey, int]
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        ids = set(self.mapping.values())
        if not ids:
            raise ValueError("empty fold assignment")
        if ids != set(range(self.k)):
            raise ValueError(f"fold ids must cover 0..{self.k - 1}, got {sorted(ids)}")

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.mapping.values():
            sizes[f] += 1
        return sizes

    def row_folds(self, lat: np.ndarray, lon: np.ndarray) -> np.ndarray:
        """Fold id per row; raises if any location is unassigned."""
        by_coord = {(key.latitude, key.longitude): f for key, f in self.mapping.items()}
        out = np.empty(lat.shape[0], dtype=np.int64)
        for i in range(lat.shape[0]):
            f = by_coord.get((lat[i], lon[i]))
            if f is None:
                raise ValueError(f"location ({lat[i]}, {lon[i]}) has no fold assignment")
            out[i] = f
        return out


def assign_spatial_folds(locations, k: int = 5) -> FoldAssignment:
    """Sort locations by (longitude, latitude) and cut into k bands.

    Band sizes differ by at most one; assignment is deterministic.
    """
    locs = sorted(set(locations), key=lambda c: (c.longitude, c.latitude))
    if len(locs) < k:
        raise ValueError(f"need at least {k} locations for {k} folds, got {len(locs)}")
    n = len(locs)
    mapping = {}
    for f in range(k):
        lo = (n * f) // k
        hi = (n * (f + 1)) // k
        for key in locs[lo:hi]:
            mapping[key] = f
    return FoldAssignment(mapping=mapping, k=k)


def _default_fitters():
    return {
        "forest": fit_random_forest,
        "gbm": lambda X, y, params, seed: fit_hist_gbm(X, y, params, seed),
        "elastic_net": lambda X, y, params, seed: fit_elastic_net_cv(
            X, y, l1_ratio=params.en_l1_ratio, lambda_grid=params.en_lambda_grid,
            tol=params.en_tol, max_iter=params.en_max_iter, seed=seed),
    }


@dataclass(frozen=True)
class OofResult:
    """OOF prediction matrix plus the audit trail of what trained on what."""

    matrix: np.ndarray                     # n × 3, columns in BASE_MODEL_ORDER
    fold_of_row: np.ndarray                # int per row
    train_rows: tuple[np.ndarray, ...]     # per fold: row indices actually trained on
    train_locations: tuple[frozenset, ...]  # per fold: (lat, lon) pairs trained on
    heldout_locations: tuple[frozenset, ...]  # per fold: (lat, lon) pairs predicted


def generate_oof_predictions(features: FeatureMatrix, folds: FoldAssignment,
                             params: LearnerParams | None = None, seed: int = 0,
                             sample_cap: int = DEFAULT_SAMPLE_CAP,
                             fitters=None) -> OofResult:
    """Out-of-fold base predictions: each fold is predicted by models
    trained only on rows outside it, downsampled to ``sample_cap``.
    """
    if params is None:
        params = LearnerParams()
    if sample_cap < 1:
        raise ValueError(f"sample_cap must be >= 1, got {sample_cap}")
    if fitters is None:
        fitters = _default_fitters()
    fold_of_row = folds.row_folds(features.lat, features.lon)
    n = features.n_rows
    matrix = np.full((n, len(BASE_MODEL_ORDER)), np.nan)
    train_rows = []
    train_locs = []
    heldout_locs = []
    for f in range(folds.k):
        test_mask = fold_of_row == f
        if not test_mask.any():
            raise ValueError(f"fold {f} holds no rows")
        rows = np.flatnonzero(~test_mask)
        if rows.size == 0:
            raise ValueError(f"fold {f} leaves no training rows")
        if rows.size > sample_cap:
            rng = np.random.default_rng(substream(seed, f"oof.downsample.{f}"))
            pick = np.sort(rng.permutation(rows.size)[:sample_cap])
            rows = rows[pick]
        Xtr = features.X[rows]
        ytr = features.y[rows]
        Xte = features.X[test_mask]
        for col, name in enumerate(BASE_MODEL_ORDER):
            fit_seed = int(np.random.default_rng(
                substream(seed, f"oof.{name}.{f}")).integers(0, 2**63 - 1))
            model = fitters[name](Xtr, ytr, params, fit_seed)
            matrix[test_mask, col] = model.predict(Xte)
        train_rows.append(rows)
        train_locs.append(frozenset(zip(features.lat[rows], features.lon[rows])))
        heldout_locs.append(frozenset(zip(features.lat[test_mask], features.lon[test_mask])))
    return OofResult(
        matrix=matrix, fold_of_row=fold_of_row, train_rows=tuple(train_rows),
        train_locations=tuple(train_locs), heldout_locations=tuple(heldout_locs),
    )


@dataclass(frozen=True)
class StackedModel:
    forest: ForestModel
    gbm: GbmModel
    elastic_net: LinearModel
    meta: LinearModel
    n_rows: int
    oof_sample_cap: int
    seed: int
    manifest_hash: str

    def __post_init__(self):
        if self.meta.n_features != len(BASE_MODEL_ORDER):
            raise ValueError(
                f"meta model must have {len(BASE_MODEL_ORDER)} coefficients, "
                f"got {self.meta.n_features}")

    @property
    def n_features(self) -> int:
        return self.forest.n_features

    def base_predictions(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        cols = [self.forest.predict(X), self.gbm.predict(X), self.elastic_net.predict(X)]
        return np.column_stack(cols)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Meta-combined prediction, clamped to the physical [0, 100]."""
        return np.clip(self.meta.predict(self.base_predictions(X)), 0.0, 100.0)


@dataclass(frozen=True)
class UncertainEstimate:
    mean: float
    base: tuple[float, float, float]
    sigma: float


def fit_stacked_ensemble(features: FeatureMatrix, k: int = 5,
                         params: LearnerParams | None = None, seed: int = 0,
                         sample_cap: int = DEFAULT_SAMPLE_CAP,
                         fitters=None) -> tuple[StackedModel, OofResult]:
    """Fit the full two-stage ensemble; returns the model and the OOF audit."""
    if params is None:
        params = LearnerParams()
    if fitters is None:
        fitters = _default_fitters()
    keys = {LocationKey(latitude=la, longitude=lo)
            for la, lo in zip(features.lat, features.lon)}
    folds = assign_spatial_folds(keys, k)
    oof = generate_oof_predictions(features, folds, params, seed, sample_cap, fitters)
    meta = fit_ridge(oof.matrix, features.y, lam=params.ridge_lambda)
    refit = {}
    for name in BASE_MODEL_ORDER:
        fit_seed = int(np.random.default_rng(
            substream(seed, f"refit.{name}")).integers(0, 2**63 - 1))
        refit[name] = fitters[name](features.X, features.y, params, fit_seed)
    model = StackedModel(
        forest=refit["forest"], gbm=refit["gbm"], elastic_net=refit["elastic_net"],
        meta=meta, n_rows=features.n_rows, oof_sample_cap=sample_cap,
        seed=int(seed), manifest_hash=features.manifest_hash,
    )
    return model, oof


def predict_with_uncertainty_arrays(model: StackedModel, X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, base n×3, sigma) arrays; sigma is the population SD of the
    three base predictions and the mean is clamped to [0, 100]."""
    if isinstance(X, FeatureMatrix):
        if X.manifest_hash != model.manifest_hash:
            raise ValueError(
                f"feature manifest {X.manifest_hash} does not match "
                f"the model's training manifest {model.manifest_hash}")
        X = X.X
    base = model.base_predictions(X)
    mean = np.clip(model.meta.predict(base), 0.0, 100.0)
    sigma = base.std(axis=1)
    return mean, base, sigma


def predict_with_uncertainty(model: StackedModel, X) -> list[UncertainEstimate]:
    mean, base, sigma = predict_with_uncertainty_arrays(model, X)
    return [
        UncertainEstimate(mean=float(mean[i]),
                          base=(float(base[i, 0]), float(base[i, 1]), float(base[i, 2])),
                          sigma=float(sigma[i]))
        for i in range(mean.shape[0])
    ]


def stacked_to_dict(model: StackedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "stacked",
        "forest": model_to_dict(model.forest),
        "gbm": model_to_dict(model.gbm),
        "elastic_net": model_to_dict(model.elastic_net),
        "meta": model_to_dict(model.meta),
        "n_rows": model.n_rows,
        "oof_sample_cap": model.oof_sample_cap,
        "seed": model.seed,
        "manifest_hash": model.manifest_hash,
    }


def stacked_from_dict(doc: dict) -> StackedModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version: {doc.get('format_version')!r}")
    if doc.get("kind") != "stacked":
        raise ValueError(f"not a stacked model document: kind={doc.get('kind')!r}")
    return StackedModel(
        forest=model_from_dict(doc["forest"]),
        gbm=model_from_dict(doc["gbm"]),
        elastic_net=model_from_dict(doc["elastic_net"]),
        meta=model_from_dict(doc["meta"]),
        n_rows=int(doc["n_rows"]),
        oof_sample_cap=int(doc["oof_sample_cap"]),
        seed=int(doc["seed"]),
        manifest_hash=str(doc["manifest_hash"]),
    )


def save_stacked_model(model: StackedModel, path) -> None:
    Path(path).write_text(
        json.dumps(stacked_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n")


def load_stacked_model(path) -> StackedModel:
    return stacked_from_dict(json.loads(Path(path).read_text()))


def write_oof_csv(path, features: FeatureMatrix, oof: OofResult,
                  comment_lines=()) -> None:
    """Audit dump: per row, fold id, target, and the three OOF columns."""
    header = ["latitude", "longitude", "year", "fold", "permafrost_fraction",
              *(f"oof_{name}" for name in BASE_MODEL_ORDER)]
    columns = [features.lat, features.lon, features.year,
               oof.fold_of_row, features.y,
               oof.matrix[:, 0], oof.matrix[:, 1], oof.matrix[:, 2]]
    write_table(path, header, columns, comment_lines)
