"""Histogram gradient boosting for squared loss.

Continuous features are quantized once into at most ``max_bins`` bins
per feature (quantile edges computed from the training data and
frozen). Each stage fits a depth-limited regression tree to the
current residuals using per-node histograms; the histogram of the
larger child is derived from the parent by subtracting the scanned
smaller child. Stored thresholds are the real-valued bin edges, so
prediction walks raw feature values and inputs outside the training
range fall into the extreme bins automatically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .params import LearnerParams
from .tree import NO_FEATURE, Tree


@dataclass(frozen=True)
class GbmModel:
    bin_edges: tuple[np.ndarray, ...]      # per feature, strictly increasing
    init: float                            # mean of the training target
    stages: tuple[tuple[Tree, float], ...]  # (tree, learning_rate)
    train_rmse: tuple[float, ...]          # after each stage

    @property
    def n_features(self) -> int:
        return len(self.bin_edges)

    @property
    def n_iterations(self) -> int:
        return len(self.stages)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got {X.shape}")
        out = np.full(X.shape[0], self.init)
        for tree, lr in self.stages:
            out += lr * tree.predict(X)
        return out


def quantile_bin_edges(col: np.ndarray, max_bins: int) -> np.ndarray:
    """Strictly increasing interior quantile edges for one feature."""
    qs = np.quantile(col, np.arange(1, max_bins) / max_bins)
    return np.unique(qs)


def bin_matrix(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    """Map values to bin ids: bin(v) <= b exactly when v <= edges[b]."""
    n, p = X.shape
    Xb = np.empty((n, p), dtype=np.uint8)
    for f in range(p):
        Xb[:, f] = np.searchsorted(edges[f], X[:, f], side="left")
    return Xb


@njit(cache=True)
def _grow_stage(Xb, edges_pad, n_edges, res, idx, max_depth, min_leaf, lr,
                feature, threshold, left, right, value, n_samples, depth,
                hists, stack, free_slots):
    """Grow one residual tree; updates ``res`` in place at the leaves.

    ``idx`` is repartitioned as the tree grows; any starting order is
    valid because histograms are order-free. Returns the node count.
    """
    n = idx.shape[0]
    p = Xb.shape[1]
    nb = hists.shape[2]

    # root histogram
    for f in range(p):
        for b in range(nb):
            hists[0, f, b, 0] = 0.0
            hists[0, f, b, 1] = 0.0
    for i in range(n):
        r = idx[i]
        rv = res[r]
        for f in range(p):
            b = Xb[r, f]
            hists[0, f, b, 0] += 1.0
            hists[0, f, b, 1] += rv

    n_free = 0
    for s in range(hists.shape[0] - 1, 0, -1):
        free_slots[n_free] = s
        n_free += 1

    stack[0, 0] = 0   # node
    stack[0, 1] = 0   # start
    stack[0, 2] = n   # end
    stack[0, 3] = 0   # depth
    stack[0, 4] = 0   # hist slot
    top = 1
    n_nodes = 1
    tmp = np.empty(n, dtype=np.int32)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        d = stack[top, 3]
        slot = stack[top, 4]
        nn = end - start

        s_tot = 0.0
        for b in range(nb):
            s_tot += hists[slot, 0, b, 1]
        mean = s_tot / nn
        value[node] = mean
        n_samples[node] = nn
        depth[node] = d
        feature[node] = NO_FEATURE

        best_proxy = s_tot * mean
        best_f = -1
        best_bin = -1
        if d < max_depth and nn >= 2 * min_leaf:
            for f in range(p):
                ke = n_edges[f]
                cl = 0.0
                sl = 0.0
                for b in range(ke):
                    cl += hists[slot, f, b, 0]
                    sl += hists[slot, f, b, 1]
                    nr = nn - cl
                    if cl >= min_leaf and nr >= min_leaf:
                        rs = s_tot - sl
                        proxy = sl * sl / cl + rs * rs / nr
                        if proxy > best_proxy:
                            best_proxy = proxy
                            best_f = f
                            best_bin = b

        if best_f < 0:
            for i in range(start, end):
                res[idx[i]] -= lr * mean
            free_slots[n_free] = slot
            n_free += 1
            continue

        # stable partition of the row segment on the chosen bin
        a = 0
        nl = 0
        for i in range(start, end):
            if Xb[idx[i], best_f] <= best_bin:
                nl += 1
        bpos = nl
        for i in range(start, end):
            r = idx[i]
            if Xb[r, best_f] <= best_bin:
                tmp[a] = r
                a += 1
            else:
                tmp[bpos] = r
                bpos += 1
        for i in range(nn):
            idx[start + i] = tmp[i]

        # scan the smaller child, derive the larger by subtraction
        slot2 = free_slots[n_free - 1]
        n_free -= 1
        if nl <= nn - nl:
            cs, ce = start, start + nl
        else:
            cs, ce = start + nl, end
        for f in range(p):
            for b in range(nb):
                hists[slot2, f, b, 0] = 0.0
                hists[slot2, f, b, 1] = 0.0
        for i in range(cs, ce):
            r = idx[i]
            rv = res[r]
            for f in range(p):
                b = Xb[r, f]
                hists[slot2, f, b, 0] += 1.0
                hists[slot2, f, b, 1] += rv
        for f in range(p):
            for b in range(nb):
                hists[slot, f, b, 0] -= hists[slot2, f, b, 0]
                hists[slot, f, b, 1] -= hists[slot2, f, b, 1]
        if nl <= nn - nl:
            left_slot, right_slot = slot2, slot
        else:
            left_slot, right_slot = slot, slot2

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = edges_pad[best_f, best_bin]
        left[node] = lid
        right[node] = rid

        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = d + 1
        stack[top, 4] = left_slot
        top += 1
        stack[top, 0] = rid
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = d + 1
        stack[top, 4] = right_slot
        top += 1

    return n_nodes


def fit_hist_gbm(X, y, params: LearnerParams | None = None, seed: int = 0) -> GbmModel:
    """Fit a gradient-boosted ensemble of histogram trees on (X, y).

    Training is fully deterministic; ``seed`` is accepted for interface
    uniformity with the other learners and left unused.
    """
    del seed
    if params is None:
        params = LearnerParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X shape {X.shape} does not match y shape {y.shape}")
    n, p = X.shape
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in training data")

    edges = [quantile_bin_edges(X[:, f], params.gbm_max_bins) for f in range(p)]
    Xb = bin_matrix(X, edges)
    max_edges = max(1, max(e.shape[0] for e in edges))
    edges_pad = np.zeros((p, max_edges))
    n_edges = np.empty(p, dtype=np.int32)
    for f in range(p):
        n_edges[f] = edges[f].shape[0]
        edges_pad[f, : n_edges[f]] = edges[f]

    init = float(np.mean(y))
    res = y - init
    idx = np.arange(n, dtype=np.int32)
    md = params.gbm_max_depth
    min_leaf = params.gbm_min_samples_leaf
    lr = params.gbm_learning_rate
    cap = min(2 ** (md + 1) - 1, 2 * max(1, n // min_leaf) + 3)
    n_slots = md + 3
    nb = max_edges + 1
    hists = np.zeros((n_slots, p, nb, 2))
    stack = np.zeros((cap, 5), dtype=np.int64)

    stages = []
    rmse_path = []
    for _ in range(params.gbm_n_iterations):
        feature = np.empty(cap, dtype=np.int32)
        threshold = np.zeros(cap)
        left = np.zeros(cap, dtype=np.int32)
        right = np.zeros(cap, dtype=np.int32)
        value = np.zeros(cap)
        n_samples = np.zeros(cap, dtype=np.int32)
        dep = np.zeros(cap, dtype=np.int32)
        free_slots = np.zeros(n_slots, dtype=np.int64)
        n_nodes = _grow_stage(
            Xb, edges_pad, n_edges, res, idx, md, min_leaf, lr,
            feature, threshold, left, right, value, n_samples, dep,
            hists, stack, free_slots,
        )
        sl = slice(0, n_nodes)
        stages.append((Tree(
            feature=feature[sl].copy(), threshold=threshold[sl].copy(),
            left=left[sl].copy(), right=right[sl].copy(), value=value[sl].copy(),
            n_samples=n_samples[sl].copy(), depth=dep[sl].copy(), n_features=p,
        ), lr))
        rmse_path.append(float(np.sqrt(np.mean(res * res))))

    return GbmModel(
        bin_edges=tuple(np.array(e) for e in edges), init=init,
        stages=tuple(stages), train_rmse=tuple(rmse_path),
    )
