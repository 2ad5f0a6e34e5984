"""Exact CART regression trees.

Splits maximize variance reduction over candidate thresholds placed at
midpoints between adjacent distinct sorted values. Gain ties break
deterministically toward the lowest feature index, then the lowest
threshold. The builder keeps per-feature presorted row indices and
partitions them stably at each split, so no re-sorting happens inside
nodes; bootstrap samples reuse a single global presort per forest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

NO_FEATURE = -1  # leaf marker in the feature array
_UNLIMITED = 1 << 30


@dataclass(frozen=True)
class Tree:
    """Flat-array binary regression tree."""

    feature: np.ndarray    # int32, NO_FEATURE at leaves
    threshold: np.ndarray  # float64, x <= threshold goes left
    left: np.ndarray       # int32 child ids
    right: np.ndarray
    value: np.ndarray      # float64 node means (prediction at leaves)
    n_samples: np.ndarray  # int32 training rows per node
    depth: np.ndarray      # int32 per node
    n_features: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.feature == NO_FEATURE).sum())

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got {X.shape}")
        return _predict_rows(
            np.ascontiguousarray(X), self.feature, self.threshold,
            self.left, self.right, self.value,
        )

    def decision_leaf(self, x: np.ndarray) -> int:
        """Node id of the single leaf reached by one input row."""
        node = 0
        while self.feature[node] != NO_FEATURE:
            f = self.feature[node]
            node = int(self.left[node]) if x[f] <= self.threshold[node] else int(self.right[node])
        return node


@njit(cache=True)
def _predict_rows(X, feature, threshold, left, right, value):
    n = X.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] != NO_FEATURE:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


@njit(cache=True, inline="always")
def _splitmix64(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _build(XT, y, sidx, m, mtry, min_leaf, max_depth, rng_state,
           feature, threshold, left, right, value, n_samples, depth):
    """Grow one tree over per-feature presorted row indices.

    ``sidx`` is (p, m): for each feature, the m sample row ids in
    ascending value order (duplicates allowed for bootstrap samples).
    All features share node segment boundaries. Returns node count.
    """
    p = XT.shape[0]
    n_orig = XT.shape[1]

    # stack of (node, start, end, depth)
    cap = feature.shape[0]
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    n_nodes = 1
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    top = 1

    marks = np.full(n_orig, -1, dtype=np.int64)   # token = marking node id
    tmp = np.empty(m, dtype=np.int32)
    perm = np.empty(p, dtype=np.int32)
    chosen = np.empty(p, dtype=np.int32)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        d = stack[top, 3]
        nn = end - start

        s = 0.0
        ss = 0.0
        col0 = sidx[0]
        for i in range(start, end):
            yv = y[col0[i]]
            s += yv
            ss += yv * yv
        mean = s / nn
        value[node] = mean
        n_samples[node] = nn
        depth[node] = d
        sse = ss - s * mean

        feature[node] = NO_FEATURE
        if d >= max_depth or nn < 2 * min_leaf or sse <= 1e-12 * nn:
            continue

        # draw the feature subset (partial Fisher-Yates), evaluate in
        # ascending feature order so ties resolve to the lowest index
        k = mtry if mtry < p else p
        if k == p:
            for j in range(p):
                chosen[j] = j
        else:
            for j in range(p):
                perm[j] = j
            for j in range(k):
                rng_state, z = _splitmix64(rng_state)
                pick = j + np.int64(z % np.uint64(p - j))
                t = perm[j]
                perm[j] = perm[pick]
                perm[pick] = t
                chosen[j] = perm[j]
            # insertion sort of the k chosen ids
            for a in range(1, k):
                key = chosen[a]
                b = a - 1
                while b >= 0 and chosen[b] > key:
                    chosen[b + 1] = chosen[b]
                    b -= 1
                chosen[b + 1] = key

        parent_proxy = s * mean
        best_proxy = parent_proxy
        best_f = -1
        best_thr = 0.0
        best_nl = 0
        for jj in range(k):
            f = chosen[jj]
            col = sidx[f]
            row = XT[f]
            left_sum = 0.0
            v_prev = row[col[start]]
            for i in range(start, end - 1):
                left_sum += y[col[i]]
                v_next = row[col[i + 1]]
                if v_next > v_prev:
                    nl = i - start + 1
                    nr = nn - nl
                    if nl >= min_leaf and nr >= min_leaf:
                        rs = s - left_sum
                        proxy = left_sum * left_sum / nl + rs * rs / nr
                        if proxy > best_proxy:
                            thr = 0.5 * (v_prev + v_next)
                            if thr >= v_next:
                                thr = v_prev
                            best_proxy = proxy
                            best_f = f
                            best_thr = thr
                            best_nl = nl
                    v_prev = v_next
                else:
                    v_prev = v_next

        if best_f < 0:
            continue

        # mark left rows by original id (node ids are unique per tree,
        # so stale marks from other nodes never collide), then
        # stable-partition every feature's segment around the split
        rowf = XT[best_f]
        colf = sidx[best_f]
        for i in range(start, end):
            if rowf[colf[i]] <= best_thr:
                marks[colf[i]] = node

        for g in range(p):
            col = sidx[g]
            a = 0
            b = best_nl
            for i in range(start, end):
                r = col[i]
                if marks[r] == node:
                    tmp[a] = r
                    a += 1
                else:
                    tmp[b] = r
                    b += 1
            for i in range(nn):
                col[start + i] = tmp[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid

        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = start + best_nl
        stack[top, 3] = d + 1
        top += 1
        stack[top, 0] = rid
        stack[top, 1] = start + best_nl
        stack[top, 2] = end
        stack[top, 3] = d + 1
        top += 1

    return n_nodes


@njit(cache=True)
def _expand_bootstrap(order0, counts, m):
    """Per-feature presorted ids for a bootstrap sample.

    ``order0`` is the (p, n) presort of the original rows; rows are
    repeated by their bootstrap multiplicity, preserving value order.
    """
    p, n = order0.shape
    sidx = np.empty((p, m), dtype=np.int32)
    for f in range(p):
        k = 0
        for i in range(n):
            r = order0[f, i]
            for _ in range(counts[r]):
                sidx[f, k] = r
                k += 1
    return sidx


def presort(XT: np.ndarray) -> np.ndarray:
    """Stable per-feature argsort, shared by all trees of a forest."""
    return np.argsort(XT, axis=1, kind="stable").astype(np.int32)


def build_tree_presorted(XT, y, sidx, mtry, min_leaf, max_depth, rng_seed) -> Tree:
    """Grow a Tree from presorted (possibly bootstrap-expanded) indices."""
    m = sidx.shape[1]
    cap = 2 * max(1, m // max(min_leaf, 1)) + 3
    feature = np.empty(cap, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.zeros(cap, dtype=np.int32)
    right = np.zeros(cap, dtype=np.int32)
    value = np.zeros(cap)
    n_samples = np.zeros(cap, dtype=np.int32)
    depth = np.zeros(cap, dtype=np.int32)
    md = _UNLIMITED if max_depth is None else int(max_depth)
    n_nodes = _build(
        XT, y, sidx, m, int(mtry), int(min_leaf), md, np.uint64(rng_seed),
        feature, threshold, left, right, value, n_samples, depth,
    )
    sl = slice(0, n_nodes)
    return Tree(
        feature=feature[sl].copy(), threshold=threshold[sl].copy(),
        left=left[sl].copy(), right=right[sl].copy(), value=value[sl].copy(),
        n_samples=n_samples[sl].copy(), depth=depth[sl].copy(),
        n_features=XT.shape[0],
    )


def fit_tree(X, y, max_depth=None, min_samples_leaf: int = 1,
             feature_subset_size=None, rng=None) -> Tree:
    """Fit one exact CART tree on (X, y).

    ``feature_subset_size`` features are drawn uniformly per node
    (all features when None). ``rng`` seeds the per-node subsampling;
    it is unused when all features are evaluated.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X shape {X.shape} does not match y shape {y.shape}")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if min_samples_leaf < 1:
        raise ValueError(f"min_samples_leaf must be >= 1, got {min_samples_leaf}")
    XT = np.ascontiguousarray(X.T)
    p = XT.shape[0]
    mtry = p if feature_subset_size in (None, 0) else int(feature_subset_size)
    if not (1 <= mtry <= p):
        raise ValueError(f"feature_subset_size must be in [1, {p}], got {mtry}")
    if rng is None:
        seed = 0
    elif isinstance(rng, np.random.Generator):
        seed = int(rng.integers(0, 2**63 - 1))
    else:
        seed = int(rng)
    sidx = presort(XT)
    return build_tree_presorted(XT, y, sidx, mtry, min_samples_leaf, max_depth, seed)
