"""Leakage-safe evaluation harnesses and the four reported metrics.

Three protocols: spatial group CV (locations never straddle the
train/test boundary), forward-chained temporal CV (training years
strictly precede the test year, with features rebuilt on the truncated
window), and a deliberately naive row-level random split that exists
to demonstrate how interpolation inflates scores.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .data_io import substream, write_table
from .domain import Dataset, LocationKey
from .features import FeatureMatrix, build_feature_matrix, impute_missing
from .learners import LearnerParams
from .stacking import (
    BASE_MODEL_ORDER,
    DEFAULT_SAMPLE_CAP,
    assign_spatial_folds,
    fit_stacked_ensemble,
)

MODEL_ORDER = (*BASE_MODEL_ORDER, "stacked")
MAPE_MIN_ABS = 1.0  # pp; rows with |y| below this are excluded from MAPE


@dataclass(frozen=True)
class MetricsReport:
    r2: float
    rmse: float
    mae: float
    mape: float
    mape_excluded: int
    n: int
    split: str = ""


def compute_metrics(y_true, y_pred, split: str = "") -> MetricsReport:
    """r2 / rmse / mae / mape with declared edge conventions.

    r2 is 0 when the target has zero variance and predictions are
    imperfect, 1 when both residuals and variance are zero. MAPE
    averages only rows with |y| >= 1 pp and reports the exclusion count.
    """
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.ndim != 1 or y_pred.ndim != 1 or y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    n = y_true.shape[0]
    if n == 0:
        raise ValueError("empty input")
    err = y_true - y_pred
    ss_res = float(np.dot(err, err))
    centered = y_true - y_true.mean()
    ss_tot = float(np.dot(centered, centered))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    rmse = float(np.sqrt(ss_res / n))
    mae = float(np.mean(np.abs(err)))
    mask = np.abs(y_true) >= MAPE_MIN_ABS
    excluded = int(n - mask.sum())
    if mask.any():
        mape = float(np.mean(np.abs(err[mask]) / np.abs(y_true[mask])) * 100.0)
    else:
        mape = math.nan
    return MetricsReport(r2=r2, rmse=rmse, mae=mae, mape=mape,
                         mape_excluded=excluded, n=n, split=split)


@dataclass(frozen=True)
class CvResult:
    """Per-split and pooled reports for every model, plus audit data."""

    fold_reports: tuple[dict, ...]          # per split: model name -> MetricsReport
    pooled: dict                            # model name -> MetricsReport
    fold_of_row: np.ndarray                 # split id per dataset row (-1 = never tested)
    pooled_predictions: dict                # model name -> aligned prediction vector
    train_locations: tuple[frozenset, ...]  # per split: (lat, lon) trained on
    test_locations: tuple[frozenset, ...]   # per split: (lat, lon) evaluated
    train_max_year: tuple[int, ...]         # per split (temporal protocol)
    test_year: tuple[int, ...]              # per split (temporal protocol)
    elapsed_seconds: float


def _fit_and_predict(features: FeatureMatrix, train_mask, test_mask, k,
                     params, seed, sample_cap, fitters):
    """Train the stacked pipeline on the masked rows, predict the rest."""
    train_fm = features.subset(train_mask)
    model, oof = fit_stacked_ensemble(train_fm, k, params, seed,
                                      sample_cap=sample_cap, fitters=fitters)
    Xte = features.X[test_mask]
    preds = {
        "forest": model.forest.predict(Xte),
        "gbm": model.gbm.predict(Xte),
        "elastic_net": model.elastic_net.predict(Xte),
        "stacked": model.predict(Xte),
    }
    return model, oof, preds


def spatial_cv(dataset: Dataset, k: int = 5, params: LearnerParams | None = None,
               seed: int = 0, sample_cap: int = DEFAULT_SAMPLE_CAP,
               fitters=None) -> CvResult:
    """Group CV over spatially contiguous location folds.

    Every location's rows sit entirely inside one fold; each fold is
    predicted by a stacked pipeline trained on the other folds. The
    pooled report concatenates all held-out predictions.
    """
    t0 = time.monotonic()
    if params is None:
        params = LearnerParams()
    dataset = impute_missing(dataset)
    features = build_feature_matrix(dataset)
    folds = assign_spatial_folds(dataset.location_keys(), k)
    fold_of_row = folds.row_folds(features.lat, features.lon)

    n = features.n_rows
    pooled_pred = {name: np.full(n, np.nan) for name in MODEL_ORDER}
    fold_reports = []
    train_locs = []
    test_locs = []
    for f in range(k):
        test_mask = fold_of_row == f
        train_mask = ~test_mask
        _, _, preds = _fit_and_predict(
            features, train_mask, test_mask, k, params,
            int(np.random.default_rng(substream(seed, f"spatial.{f}")).integers(2**63 - 1)),
            sample_cap, fitters)
        reports = {}
        for name in MODEL_ORDER:
            pooled_pred[name][test_mask] = preds[name]
            reports[name] = compute_metrics(features.y[test_mask], preds[name],
                                            split=f"spatial-fold-{f}")
        fold_reports.append(reports)
        train_locs.append(frozenset(zip(features.lat[train_mask], features.lon[train_mask])))
        test_locs.append(frozenset(zip(features.lat[test_mask], features.lon[test_mask])))

    pooled = {name: compute_metrics(features.y, pooled_pred[name], split="spatial-pooled")
              for name in MODEL_ORDER}
    return CvResult(
        fold_reports=tuple(fold_reports), pooled=pooled, fold_of_row=fold_of_row,
        pooled_predictions=pooled_pred, train_locations=tuple(train_locs),
        test_locations=tuple(test_locs), train_max_year=(), test_year=(),
        elapsed_seconds=time.monotonic() - t0,
    )


def temporal_cv(dataset: Dataset, min_train_years: int = 8,
                params: LearnerParams | None = None, seed: int = 0,
                sample_cap: int = DEFAULT_SAMPLE_CAP, fitters=None,
                k: int = 5) -> CvResult:
    """Expanding-window CV: train on years < y, test on year y.

    The feature matrix is rebuilt from the dataset truncated at the
    test year for every window, so trend, lag, and anomaly features
    never read observations the training models could not have seen.
    """
    t0 = time.monotonic()
    if params is None:
        params = LearnerParams()
    start, end = dataset.start_year, dataset.end_year
    if end - start + 1 <= min_train_years:
        raise ValueError(
            f"need more than {min_train_years} years, have {start}..{end}")
    dataset = impute_missing(dataset)

    fold_of_row = np.full(dataset.n_rows, -1, dtype=np.int64)
    pooled_true = {name: [] for name in MODEL_ORDER}
    pooled_pred = {name: [] for name in MODEL_ORDER}
    fold_reports = []
    train_locs = []
    test_locs = []
    train_max_years = []
    test_years = []
    for i, test_year in enumerate(range(start + min_train_years, end + 1)):
        window = dataset.subset_years(start, test_year)
        features = build_feature_matrix(window)
        test_mask = features.year == test_year
        train_mask = ~test_mask
        _, _, preds = _fit_and_predict(
            features, train_mask, test_mask, k, params,
            int(np.random.default_rng(substream(seed, f"temporal.{test_year}")).integers(2**63 - 1)),
            sample_cap, fitters)
        reports = {}
        for name in MODEL_ORDER:
            reports[name] = compute_metrics(features.y[test_mask], preds[name],
                                            split=f"temporal-{test_year}")
            pooled_true[name].append(features.y[test_mask])
            pooled_pred[name].append(preds[name])
        fold_reports.append(reports)
        fold_of_row[dataset.year == test_year] = i
        train_locs.append(frozenset(zip(features.lat[train_mask], features.lon[train_mask])))
        test_locs.append(frozenset(zip(features.lat[test_mask], features.lon[test_mask])))
        train_max_years.append(int(features.year[train_mask].max()))
        test_years.append(test_year)

    pooled = {
        name: compute_metrics(np.concatenate(pooled_true[name]),
                              np.concatenate(pooled_pred[name]),
                              split="temporal-pooled")
        for name in MODEL_ORDER
    }
    return CvResult(
        fold_reports=tuple(fold_reports), pooled=pooled, fold_of_row=fold_of_row,
        pooled_predictions={}, train_locations=tuple(train_locs),
        test_locations=tuple(test_locs), train_max_year=tuple(train_max_years),
        test_year=tuple(test_years), elapsed_seconds=time.monotonic() - t0,
    )


def random_split_baseline(dataset: Dataset, test_fraction: float = 0.2,
                          params: LearnerParams | None = None, seed: int = 0,
                          sample_cap: int = DEFAULT_SAMPLE_CAP,
                          fitters=None, k: int = 5) -> MetricsReport:
    """Row-level random split ignoring location and year grouping.

    Locations leak across the boundary by construction; this baseline
    exists to quantify interpolation inflation against the grouped CVs.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if params is None:
        params = LearnerParams()
    dataset = impute_missing(dataset)
    features = build_feature_matrix(dataset)
    n = features.n_rows
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise ValueError(f"degenerate split: {n_test} test rows of {n}")
    rng = np.random.default_rng(substream(seed, "random-split"))
    perm = rng.permutation(n)
    test_mask = np.zeros(n, dtype=bool)
    test_mask[perm[:n_test]] = True
    _, _, preds = _fit_and_predict(
        features, ~test_mask, test_mask, k, params,
        int(np.random.default_rng(substream(seed, "random-split.fit")).integers(2**63 - 1)),
        sample_cap, fitters)
    return compute_metrics(features.y[test_mask], preds["stacked"],
                           split=f"random-{test_fraction}")


def write_validation_csv(path, results: dict, comment_lines=(),
                         leakage_demo: bool = False) -> None:
    """One row per (split, model): stable column order for golden tests.

    ``results`` maps a protocol label to a CvResult or MetricsReport.
    ``leakage_demo`` marks every row; set it on random-split reports,
    whose optimistic metrics exist to demonstrate spatial leakage.
    """
    split_col, model_col = [], []
    r2s, rmses, maes, mapes, excl, ns = [], [], [], [], [], []

    def add(report: MetricsReport, model: str):
        split_col.append(report.split)
        model_col.append(model)
        r2s.append(report.r2)
        rmses.append(report.rmse)
        maes.append(report.mae)
        mapes.append(report.mape)
        excl.append(report.mape_excluded)
        ns.append(report.n)

    for label in sorted(results):
        res = results[label]
        if isinstance(res, MetricsReport):
            add(res, "stacked")
            continue
        for reports in res.fold_reports:
            for name in MODEL_ORDER:
                add(reports[name], name)
        for name in MODEL_ORDER:
            add(res.pooled[name], name)

    write_table(path, ["split", "model", "r2", "rmse", "mae", "mape",
                       "mape_excluded", "n", "leakage_demo"],
                [split_col, model_col, np.array(r2s), np.array(rmses),
                 np.array(maes), np.array(mapes), np.array(excl),
                 np.array(ns), np.full(len(ns), int(leakage_demo))],
                comment_lines)
