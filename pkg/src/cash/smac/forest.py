"""Random-forest surrogate with a per-tree predictive distribution.

Trees are grown on bootstrap samples of (encoded config, mean loss) pairs.
Each split searches a random subset of features and minimizes the summed
squared error of the two children; leaves predict the mean of their
samples.  The growing and traversal loops are compiled with numba, since
SMAC refits the forest at every model-based step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..evaluator import RunHistory
from ..space import ParamSpace

N_TREES = 64
MIN_LEAF = 3
FEATURE_FRACTION = 5 / 6


@dataclass(frozen=True)
class Posterior:
    mu: float
    sigma2: float

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


def tree_moments(per_tree: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population variance over axis 0 of a (trees, queries) matrix."""
    per_tree = np.asarray(per_tree, dtype=float)
    mu = per_tree.mean(axis=0)
    var = np.mean((per_tree - mu) ** 2, axis=0)
    # exact agreement must give exactly zero despite rounding in the mean
    var[np.all(per_tree == per_tree[:1], axis=0)] = 0.0
    return mu, var


@numba.njit(cache=True)
def _grow_tree(X, y, idx, min_leaf, n_feat, feature, threshold, left, right, value, count):
    """Grow one tree over the bootstrap rows ``idx``; returns its node count.

    ``order[f]`` lists bootstrap positions sorted by feature f; every node
    owns the same segment [lo, hi) of each list, kept sorted by stable
    partitioning, so no node ever sorts.
    """
    d = X.shape[1]
    n = idx.shape[0]
    order = np.empty((d, n), np.int64)
    for f in range(d):
        order[f] = np.argsort(X[idx, f], kind="mergesort")
    ys = np.empty(n)
    for i in range(n):
        ys[i] = y[idx[i]]
    goes_left = np.zeros(n, np.bool_)
    buf = np.empty(n, np.int64)
    stack_node = np.empty(2 * n + 2, np.int64)
    stack_lo = np.empty(2 * n + 2, np.int64)
    stack_hi = np.empty(2 * n + 2, np.int64)
    perm = np.arange(d)
    n_nodes = 1
    top = 0
    stack_node[0], stack_lo[0], stack_hi[0] = 0, 0, n
    while top >= 0:
        node, lo, hi = stack_node[top], stack_lo[top], stack_hi[top]
        top -= 1
        m = hi - lo
        total = 0.0
        pure = True
        first = ys[order[0, lo]]
        for i in range(lo, hi):
            v = ys[order[0, i]]
            total += v
            if v != first:
                pure = False
        value[node] = total / m
        count[node] = m
        left[node] = -1
        right[node] = -1
        if m < 2 * min_leaf or pure:
            continue
        best_gain, best_f, best_t = -1.0, -1, 0.0
        base = total * total / m
        tried = 0
        for j in range(d):
            # partial Fisher-Yates: features are visited in a fresh random order
            r = j + np.random.randint(d - j)
            perm[j], perm[r] = perm[r], perm[j]
            f = perm[j]
            row = order[f]
            if X[idx[row[lo]], f] == X[idx[row[hi - 1]], f]:
                continue
            tried += 1
            s_left = 0.0
            for i in range(lo, hi - 1):
                s_left += ys[row[i]]
                nl = i - lo + 1
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                a = X[idx[row[i]], f]
                b = X[idx[row[i + 1]], f]
                if a == b:
                    continue
                s_right = total - s_left
                gain = s_left * s_left / nl + s_right * s_right / (m - nl) - base
                if gain > best_gain:
                    best_gain, best_f, best_t = gain, f, 0.5 * (a + b)
                    if best_t == b:
                        best_t = a
            if tried >= n_feat and best_f >= 0:
                break
        if best_f < 0 or best_gain <= 0.0:
            continue
        n_left = 0
        for i in range(lo, hi):
            pos = order[0, i]
            goes_left[pos] = X[idx[pos], best_f] <= best_t
            if goes_left[pos]:
                n_left += 1
        for f in range(d):
            a, b = lo, lo + n_left
            for i in range(lo, hi):
                pos = order[f, i]
                if goes_left[pos]:
                    buf[a] = pos
                    a += 1
                else:
                    buf[b] = pos
                    b += 1
            for i in range(lo, hi):
                order[f, i] = buf[i]
        mid = lo + n_left
        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        top += 1
        stack_node[top], stack_lo[top], stack_hi[top] = n_nodes, lo, mid
        top += 1
        stack_node[top], stack_lo[top], stack_hi[top] = n_nodes + 1, mid, hi
        n_nodes += 2
    return n_nodes


@numba.njit(cache=True)
def _grow_forest(X, y, n_trees, min_leaf, n_feat, seed):
    n = X.shape[0]
    cap = max(2 * n, 2)
    feature = np.full((n_trees, cap), -1, np.int64)
    threshold = np.zeros((n_trees, cap))
    left = np.full((n_trees, cap), -1, np.int64)
    right = np.full((n_trees, cap), -1, np.int64)
    value = np.zeros((n_trees, cap))
    count = np.zeros((n_trees, cap), np.int64)
    sizes = np.zeros(n_trees, np.int64)
    np.random.seed(seed)
    for b in range(n_trees):
        idx = np.random.randint(0, n, n)
        sizes[b] = _grow_tree(X, y, idx, min_leaf, n_feat, feature[b], threshold[b],
                              left[b], right[b], value[b], count[b])
    return feature, threshold, left, right, value, count, sizes


@numba.njit(cache=True)
def _predict_trees(Q, feature, threshold, left, right, value):
    n_trees = feature.shape[0]
    out = np.empty((n_trees, Q.shape[0]))
    for b in range(n_trees):
        for q in range(Q.shape[0]):
            node = 0
            while left[b, node] >= 0:
                if Q[q, feature[b, node]] <= threshold[b, node]:
                    node = left[b, node]
                else:
                    node = right[b, node]
            out[b, q] = value[b, node]
    return out


class RegressionForest:
    """Bootstrapped regression trees; the spread of tree predictions is the uncertainty."""

    def __init__(self, n_trees: int = N_TREES, min_leaf: int = MIN_LEAF,
                 feature_fraction: float = FEATURE_FRACTION, seed: int = 0):
        self.n_trees = n_trees
        self.min_leaf = min_leaf
        self.feature_fraction = feature_fraction
        self.seed = seed
        self._arrays = None

    def fit(self, X, y) -> "RegressionForest":
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] == 0:
            raise ValueError("need a non-empty (n, d) matrix and n targets")
        n_feat = max(1, int(self.feature_fraction * X.shape[1]))
        feature, threshold, left, right, value, self._count, self.sizes = _grow_forest(
            X, y, self.n_trees, self.min_leaf, n_feat, self.seed % (2**32 - 1))
        self._arrays = (feature, threshold, left, right, value)
        return self

    def leaf_sizes(self) -> list[np.ndarray]:
        """Bootstrap rows in each leaf, per tree."""
        left = self._arrays[2]
        return [self._count[b, : self.sizes[b]][left[b, : self.sizes[b]] < 0]
                for b in range(self.n_trees)]

    def tree_predictions(self, X) -> np.ndarray:
        Q = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        return _predict_trees(Q, *self._arrays)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Per-query mean and population variance of the tree predictions."""
        return tree_moments(self.tree_predictions(X))


def training_set(history: RunHistory, space: ParamSpace, config_ids=None):
    """Encoded configs and their mean loss over the folds evaluated so far."""
    ids = history.evaluated_ids() if config_ids is None else list(config_ids)
    X = space.encode_many([history.configs[c] for c in ids])
    y = np.array([history.mean_loss(c) for c in ids])
    return X, y


def fit_forest(history: RunHistory, space: ParamSpace, rng: np.random.Generator,
               **forest_args) -> RegressionForest:
    X, y = training_set(history, space)
    seed = int(rng.integers(2**31 - 1))
    return RegressionForest(seed=seed, **forest_args).fit(X, y)


def predict(forest: RegressionForest, space: ParamSpace, config) -> Posterior:
    mu, var = forest.predict(space.encode(config)[None, :])
    return Posterior(float(mu[0]), float(var[0]))
