"""Linear models: elastic net by cyclic coordinate descent, closed-form ridge.

Both standardize columns internally (zero mean, unit population SD;
constant columns are frozen at coefficient zero) and report coefficients
in the original feature scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    feature_means: np.ndarray
    feature_sds: np.ndarray

    def __post_init__(self):
        if not (np.all(np.isfinite(self.coefficients)) and np.isfinite(self.intercept)):
            raise ValueError("non-finite linear model parameters")

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} feature columns, got {X.shape}"
            )
        return X @ self.coefficients + self.intercept


def _standardize(X):
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    live = sd > 0.0
    safe = np.where(live, sd, 1.0)
    return (X - mean) / safe, mean, safe, live


def _check_xy(X, y):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValueError(f"y shape {y.shape} does not match X shape {X.shape}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("non-finite values in training data")
    return X, y


@njit(cache=True)
def _cd_sweeps(G, q, beta, Gbeta, live, n, lam_l1, lam_l2, tol, max_iter):
    """Cyclic coordinate descent in covariance form.

    G = Xs^T Xs and q = Xs^T (y - ybar) over standardized columns, so
    each coordinate's partial residual correlation is (q_j - (G b)_j)/n
    and a sweep costs O(p^2) independent of the row count. ``Gbeta``
    holds G @ beta and is updated in place alongside ``beta``. Columns
    have unit population SD, hence G[j, j] == n.
    """
    p = beta.shape[0]
    for it in range(max_iter):
        delta = 0.0
        for j in range(p):
            if not live[j]:
                continue
            b_old = beta[j]
            rho = b_old + (q[j] - Gbeta[j]) / n
            if rho > lam_l1:
                b_new = (rho - lam_l1) / (1.0 + lam_l2)
            elif rho < -lam_l1:
                b_new = (rho + lam_l1) / (1.0 + lam_l2)
            else:
                b_new = 0.0
            d = b_new - b_old
            if d != 0.0:
                row = G[j]
                for k in range(p):
                    Gbeta[k] += row[k] * d
                beta[j] = b_new
                if abs(d) > delta:
                    delta = abs(d)
        if delta < tol:
            return it + 1
    return max_iter


def fit_elastic_net(X, y, l1_ratio: float = 0.5, lam: float = 0.01,
                    tol: float = 1e-6, max_iter: int = 2000) -> LinearModel:
    """Elastic-net regression minimizing

        (1/2n)·SSE + lam·(l1_ratio·||b||_1 + (1-l1_ratio)/2·||b||_2^2)

    over standardized columns. Stops when the largest coefficient change
    in a sweep drops below ``tol``.
    """
    if not (0.0 <= l1_ratio <= 1.0):
        raise ValueError(f"l1_ratio must be in [0, 1], got {l1_ratio}")
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    X, y = _check_xy(X, y)
    Xs, mean, sd, live = _standardize(X)
    ybar = y.mean()
    G = Xs.T @ Xs
    q = Xs.T @ (y - ybar)
    beta = np.zeros(X.shape[1])
    _cd_sweeps(G, q, beta, np.zeros(X.shape[1]), live, X.shape[0],
               lam * l1_ratio, lam * (1.0 - l1_ratio), tol, max_iter)
    coef = beta / sd
    coef[~live] = 0.0
    return LinearModel(
        coefficients=coef,
        intercept=float(ybar - np.dot(coef, mean)),
        feature_means=mean,
        feature_sds=sd,
    )


def elastic_net_objective(X, y, model: LinearModel, l1_ratio: float, lam: float) -> float:
    """Objective value on the standardized scale (for optimality checks)."""
    X = np.asarray(X, dtype=np.float64)
    resid = y - model.predict(X)
    beta = model.coefficients * model.feature_sds
    n = X.shape[0]
    return float(
        0.5 * np.dot(resid, resid) / n
        + lam * (l1_ratio * np.abs(beta).sum() + 0.5 * (1.0 - l1_ratio) * np.dot(beta, beta))
    )


def fit_elastic_net_cv(X, y, l1_ratio: float = 0.5,
                       lambda_grid=(0.001, 0.01, 0.1, 1.0),
                       tol: float = 1e-5, max_iter: int = 500,
                       seed: int = 0) -> LinearModel:
    """Select lambda from the grid by 3-fold CV on the training rows.

    Folds are contiguous thirds of a seeded shuffle. The winning lambda
    (lowest mean validation MSE, first on ties in grid order) is refit
    on all rows.
    """
    X, y = _check_xy(X, y)
    n = X.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x656E6376]))
    perm = rng.permutation(n)
    bounds = [(n * k) // 3 for k in range(4)]
    grid = [float(lam) for lam in lambda_grid]
    descending = np.argsort(grid)[::-1]
    scores = np.zeros(len(grid))
    for k in range(3):
        val = perm[bounds[k]:bounds[k + 1]]
        tr = np.setdiff1d(perm, val, assume_unique=True)
        Xs, mean, sd, live = _standardize(X[tr])
        ybar = y[tr].mean()
        G = Xs.T @ Xs
        q = Xs.T @ (y[tr] - ybar)
        beta = np.zeros(X.shape[1])
        gbeta = np.zeros(X.shape[1])
        Xval_s = (X[val] - mean) / sd
        # descend the grid warm-starting beta; Gbeta stays consistent
        # across lambdas, so each continues from the previous solution
        for g in descending:
            _cd_sweeps(G, q, beta, gbeta, live, tr.size, grid[g] * l1_ratio,
                       grid[g] * (1.0 - l1_ratio), tol, max_iter)
            err = y[val] - (Xval_s @ beta + ybar)
            scores[g] += np.dot(err, err) / val.size
    best = int(np.argmin(scores))
    return fit_elastic_net(X, y, l1_ratio, grid[best], tol, max_iter)


def fit_ridge(X, y, lam: float = 1.0) -> LinearModel:
    """Closed-form ridge on standardized columns; intercept unpenalized.

    Solves (Xs^T Xs + lam·I) b = Xs^T yc. lam = 0 requires a full-rank
    system and raises on singularity.
    """
    if lam < 0.0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    X, y = _check_xy(X, y)
    Xs, mean, sd, live = _standardize(X)
    ybar = y.mean()
    yc = y - ybar
    p = X.shape[1]
    A = Xs.T @ Xs + lam * np.eye(p)
    b = Xs.T @ yc
    try:
        beta = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular ridge system with lambda={lam}") from exc
    if lam == 0.0:
        # solve() tolerates near-singular systems; reject unstable solutions
        if not np.allclose(A @ beta, b, rtol=1e-6, atol=1e-8 * max(1.0, np.abs(b).max())):
            raise np.linalg.LinAlgError("singular ridge system with lambda=0")
    beta[~live] = 0.0
    coef = beta / sd
    coef[~live] = 0.0
    return LinearModel(
        coefficients=coef,
        intercept=float(ybar - np.dot(coef, mean)),
        feature_means=mean,
        feature_sds=sd,
    )
