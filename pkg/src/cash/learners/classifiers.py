"""Base classifiers.

Every classifier accepts per-instance weights (AdaBoost.M1 trains its base
learner by reweighting) and charges its work against a :class:`Budget`.
Scores returned by :meth:`Classifier.scores` are per-class; ``predict``
takes the argmax, so ties go to the lowest class index.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from ..errors import BudgetExhausted
from . import _tree


class Budget:
    """Instance-evaluation counter with an optional wall-clock deadline.

    ``cap=None`` means unlimited.  A cap of 0 is exhausted by the first
    charge, since every learner charges at least one unit per instance.
    """

    def __init__(self, cap: int | None = None, timeout: float | None = None):
        self.cap = cap
        self.used = 0
        self.deadline = None if timeout is None else time.monotonic() + timeout

    def charge(self, units) -> None:
        self.used += int(units)
        if self.cap is not None and self.used > self.cap:
            raise BudgetExhausted(f"used {self.used} of {self.cap} instance evaluations")
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise BudgetExhausted("wall-clock limit reached")


UNLIMITED = None


def _charge(budget, units):
    if budget is not None:
        budget.charge(units)


@dataclass(frozen=True)
class Schema:
    """Column kinds of the training data, needed by every learner."""

    categorical: np.ndarray
    n_levels: np.ndarray
    n_classes: int

    @classmethod
    def of(cls, data) -> "Schema":
        return cls(np.array([a.is_categorical for a in data.attributes], dtype=bool),
                   np.array([a.n_levels for a in data.attributes], dtype=np.int64),
                   data.n_classes)

    def select(self, columns) -> "Schema":
        cols = np.asarray(columns, dtype=np.int64)
        return Schema(self.categorical[cols], self.n_levels[cols], self.n_classes)


def _weights(w, n):
    if w is None:
        return np.ones(n)
    w = np.asarray(w, dtype=float)
    s = w.sum()
    return w * (n / s) if s > 0 else np.ones(n)


class Classifier:
    name = "classifier"

    def fit(self, X, y, schema: Schema, sample_weight=None, budget=None, rng=None):
        raise NotImplementedError

    def scores(self, X, budget=None) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X, budget=None) -> np.ndarray:
        return np.argmax(self.scores(X, budget), axis=1)


class ZeroR(Classifier):
    name = "zero_r"

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        _charge(budget, len(y))
        w = _weights(sample_weight, len(y))
        self.dist_ = np.bincount(y, weights=w, minlength=schema.n_classes)
        self.majority_ = int(np.argmax(self.dist_))
        return self

    def scores(self, X, budget=None):
        _charge(budget, len(X))
        return np.tile(self.dist_, (len(X), 1))


class OneR(Classifier):
    """Single-attribute rule learner; numeric attributes are bucketed so that
    each bucket's majority class covers at least ``min_bucket`` instances."""

    name = "one_r"

    def __init__(self, min_bucket: int = 6):
        self.min_bucket = min_bucket

    def _numeric_rule(self, x, y, w, C):
        order = np.argsort(x, kind="stable")
        xs, ys, ws = x[order], y[order], w[order]
        n = len(xs)
        cuts, classes = [], []
        counts = np.zeros(C)
        i = 0
        while i < n:
            counts[ys[i]] += ws[i]
            i += 1
            if i < n and xs[i] == xs[i - 1]:
                continue
            if counts.max() >= self.min_bucket or i == n:
                classes.append(int(np.argmax(counts)))
                cuts.append(0.5 * (xs[i - 1] + xs[i]) if i < n else np.inf)
                counts = np.zeros(C)
        # merge neighbours that predict the same class
        m_cuts, m_cls = [], []
        for c, k in zip(cuts, classes):
            if m_cls and m_cls[-1] == k:
                m_cuts[-1] = c
            else:
                m_cuts.append(c)
                m_cls.append(k)
        thr = np.array(m_cuts)
        cls = np.array(m_cls, dtype=np.int64)
        pred = cls[np.searchsorted(thr, x, side="left")]
        return ("num", thr, cls), float(w[pred == y].sum())

    def _categorical_rule(self, x, y, w, L, C, default):
        tab = np.zeros((L, C))
        np.add.at(tab, (x.astype(np.int64), y), w)
        cls = np.where(tab.sum(1) > 0, np.argmax(tab, axis=1), default)
        pred = cls[x.astype(np.int64)]
        return ("cat", None, cls), float(w[pred == y].sum())

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        n, d = X.shape
        _charge(budget, n * max(d, 1))
        C = schema.n_classes
        w = _weights(sample_weight, n)
        self.default_ = int(np.argmax(np.bincount(y, weights=w, minlength=C)))
        best, best_acc = None, -1.0
        for j in range(d):
            if schema.categorical[j]:
                rule, acc = self._categorical_rule(X[:, j], y, w, schema.n_levels[j], C, self.default_)
            else:
                rule, acc = self._numeric_rule(X[:, j], y, w, C)
            if acc > best_acc + 1e-12:
                best, best_acc = (j, rule), acc
        self.rule_ = best
        self.n_classes_ = C
        return self

    def scores(self, X, budget=None):
        _charge(budget, len(X))
        out = np.zeros((len(X), self.n_classes_))
        if self.rule_ is None:
            out[:, self.default_] = 1.0
            return out
        j, (kind, thr, cls) = self.rule_
        if kind == "num":
            pred = cls[np.searchsorted(thr, X[:, j], side="left")]
        else:
            codes = X[:, j].astype(np.int64)
            pred = np.where(codes < len(cls), cls[np.minimum(codes, len(cls) - 1)], self.default_)
        out[np.arange(len(X)), pred] = 1.0
        return out


# -- decision trees ------------------------------------------------------------


class _TreeArrays:
    __slots__ = ("feature", "threshold", "is_cat", "left", "right", "value")

    def __init__(self, feature, threshold, is_cat, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=float)
        self.is_cat = np.asarray(is_cat, dtype=bool)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    def apply(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            inner = np.flatnonzero(feat >= 0)
            if inner.size == 0:
                return node
            nd = node[inner]
            xv = X[inner, feat[inner]]
            go_left = np.where(self.is_cat[nd], xv == self.threshold[nd], xv <= self.threshold[nd])
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])


def grow_tree(X, y, w, schema, *, criterion="gini", max_depth=20, min_leaf=1,
              max_features=None, rng=None, budget=None, ranks=None) -> _TreeArrays:
    """Grow a classification tree; leaves hold normalized class distributions.

    Each visited node charges its instance count to ``budget``.  ``ranks``
    may pass precomputed :func:`_tree.dense_ranks` of ``X``.
    """
    C = schema.n_classes
    X = np.ascontiguousarray(X, dtype=float)
    n, d = X.shape
    W = np.zeros((n, C))
    W[np.arange(n), y] = w
    R, n_ranks = _tree.dense_ranks(X) if ranks is None else ranks
    mf = d if max_features is None else min(int(max_features), d)
    seed = int(rng.integers(2**31 - 1)) if mf < d else 0
    cap = -1
    if budget is not None and budget.cap is not None:
        cap = max(budget.cap - budget.used, 0)
    *arrays, used = _tree.grow(X, np.asarray(y, dtype=np.int64), W, R, n_ranks,
                               np.asarray(schema.categorical, dtype=np.bool_),
                               np.asarray(schema.n_levels, dtype=np.int64),
                               _tree.GINI if criterion == "gini" else _tree.ENTROPY,
                               int(max_depth), int(min_leaf), mf, seed, cap)
    _charge(budget, used)
    return _TreeArrays(*arrays)


class DecisionStump(Classifier):
    name = "decision_stump"

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        w = _weights(sample_weight, len(y))
        self.tree_ = grow_tree(X, y, w, schema, criterion="entropy", max_depth=1,
                               min_leaf=1, budget=budget)
        return self

    def scores(self, X, budget=None):
        _charge(budget, len(X))
        return self.tree_.value[self.tree_.apply(X)]


class CartTree(Classifier):
    name = "cart_tree"

    def __init__(self, criterion="gini", max_depth=10, min_leaf=2):
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        w = _weights(sample_weight, len(y))
        self.tree_ = grow_tree(X, y, w, schema, criterion=self.criterion,
                               max_depth=self.max_depth, min_leaf=self.min_leaf, budget=budget)
        return self

    def scores(self, X, budget=None):
        _charge(budget, len(X))
        return self.tree_.value[self.tree_.apply(X)]


class RandomForest(Classifier):
    name = "random_forest"

    def __init__(self, n_trees=10, feature_fraction=0.5, max_depth=20):
        self.n_trees = n_trees
        self.feature_fraction = feature_fraction
        self.max_depth = max_depth

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        n, d = X.shape
        w = _weights(sample_weight, n)
        p = w / w.sum()
        mf = max(1, int(round(self.feature_fraction * d))) if d else None
        self.trees_ = []
        R, n_ranks = _tree.dense_ranks(np.asarray(X, dtype=float))
        for _ in range(self.n_trees):
            idx = rng.choice(n, size=n, replace=True, p=p)
            # ranks of the full sample still order any bootstrap of it
            self.trees_.append(grow_tree(X[idx], y[idx], np.ones(n), schema, criterion="gini",
                                         max_depth=self.max_depth, min_leaf=1,
                                         max_features=mf, rng=rng, budget=budget,
                                         ranks=(R[idx], n_ranks)))
        return self

    def scores(self, X, budget=None):
        _charge(budget, len(X) * len(self.trees_))
        return sum(t.value[t.apply(X)] for t in self.trees_) / len(self.trees_)


# -- instance based / probabilistic / linear -------------------------------------


class KNN(Classifier):
    name = "knn"

    def __init__(self, k=1, weighting="uniform"):
        self.k = k
        self.weighting = weighting

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        _charge(budget, len(y))
        self.cat_ = schema.categorical.copy()
        lo = X.min(0) if len(X) else np.zeros(X.shape[1])
        hi = X.max(0) if len(X) else np.ones(X.shape[1])
        span = np.where(hi > lo, hi - lo, 1.0)
        self.lo_, self.span_ = lo, span
        self.X_ = self._scale(X)
        self.y_ = y.copy()
        self.w_ = _weights(sample_weight, len(y))
        self.C_ = schema.n_classes
        return self

    def _scale(self, X):
        Z = (X - self.lo_) / self.span_
        return np.where(self.cat_, X, Z)

    def scores(self, X, budget=None):
        Q = self._scale(X)
        n = len(self.y_)
        _charge(budget, len(Q) * n)
        num, cat = ~self.cat_, self.cat_
        D = np.zeros((len(Q), n))
        if num.any():
            diff = Q[:, None, num] - self.X_[None, :, num]
            D += (diff * diff).sum(-1)
        if cat.any():
            D += (Q[:, None, cat] != self.X_[None, :, cat]).sum(-1)
        k = min(self.k, n)
        nn = np.argsort(D, axis=1, kind="stable")[:, :k]
        votes = self.w_[nn]
        if self.weighting == "inverse_distance":
            votes = votes / (np.sqrt(np.take_along_axis(D, nn, 1)) + 1e-6)
        out = np.zeros((len(Q), self.C_))
        np.add.at(out, (np.repeat(np.arange(len(Q)), k), self.y_[nn].ravel()), votes.ravel())
        return out


class NaiveBayes(Classifier):
    name = "naive_bayes"

    def __init__(self, numeric_model="gaussian"):
        self.numeric_model = numeric_model

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        n, d = X.shape
        _charge(budget, n * max(d, 1))
        C = schema.n_classes
        w = _weights(sample_weight, n)
        cw = np.bincount(y, weights=w, minlength=C)
        self.log_prior_ = np.log((cw + 1.0) / (cw.sum() + C))
        self.schema_ = schema
        self.tables_ = {}
        self.gauss_ = {}
        self.kde_ = {}
        overall_sd = X.std(0) if n else np.ones(d)
        for j in range(d):
            if schema.categorical[j]:
                L = int(schema.n_levels[j])
                tab = np.zeros((C, L))
                np.add.at(tab, (y, X[:, j].astype(np.int64)), w)
                self.tables_[j] = np.log((tab + 1.0) / (tab.sum(1, keepdims=True) + L))
                continue
            floor = max(1e-3 * overall_sd[j], 1e-9) if overall_sd[j] > 0 else 1e-3
            mu, sd = np.zeros(C), np.ones(C)
            for c in range(C):
                m = y == c
                if cw[c] > 0:
                    mu[c] = np.average(X[m, j], weights=w[m])
                    sd[c] = max(math.sqrt(np.average((X[m, j] - mu[c]) ** 2, weights=w[m])), floor)
            self.gauss_[j] = (mu, sd)
            if self.numeric_model == "kernel":
                pts = []
                for c in range(C):
                    m = y == c
                    xs, ws = X[m, j], w[m]
                    h = max(1.06 * sd[c] * max(m.sum(), 1) ** -0.2, floor)
                    pts.append((xs, ws / ws.sum() if ws.sum() > 0 else ws, h))
                self.kde_[j] = pts
        return self

    def scores(self, X, budget=None):
        m, d = X.shape
        _charge(budget, m * max(d, 1))
        C = self.schema_.n_classes
        out = np.tile(self.log_prior_, (m, 1))
        for j in range(d):
            if j in self.tables_:
                codes = np.clip(X[:, j].astype(np.int64), 0, self.tables_[j].shape[1] - 1)
                out += self.tables_[j][:, codes].T
            elif j in self.kde_:
                for c, (xs, ws, h) in enumerate(self.kde_[j]):
                    if xs.size == 0:
                        mu, sd = self.gauss_[j]
                        out[:, c] += -0.5 * ((X[:, j] - mu[c]) / sd[c]) ** 2 - math.log(sd[c])
                        continue
                    z = (X[:, j][:, None] - xs[None, :]) / h
                    dens = (np.exp(-0.5 * z * z) * ws[None, :]).sum(1) / (h * math.sqrt(2 * math.pi))
                    out[:, c] += np.log(dens + 1e-300)
            else:
                mu, sd = self.gauss_[j]
                z = (X[:, j][:, None] - mu[None, :]) / sd[None, :]
                out += -0.5 * z * z - np.log(sd)[None, :]
        return out


class LogisticSGD(Classifier):
    """Multinomial logistic regression trained by mini-batch SGD."""

    name = "logistic_sgd"
    batch_size = 32

    def __init__(self, learning_rate=0.1, l2=1e-4, epochs=20):
        self.learning_rate = learning_rate
        self.l2 = l2
        self.epochs = epochs

    def _design(self, X):
        parts = []
        for j in range(X.shape[1]):
            if self.cat_[j]:
                L = int(self.levels_[j])
                oh = np.zeros((len(X), L))
                codes = np.clip(X[:, j].astype(np.int64), 0, L - 1)
                oh[np.arange(len(X)), codes] = 1.0
                parts.append(oh)
            else:
                parts.append(((X[:, j] - self.mu_[j]) / self.sd_[j])[:, None])
        parts.append(np.ones((len(X), 1)))
        return np.hstack(parts)

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        n = len(y)
        self.cat_ = schema.categorical.copy()
        self.levels_ = schema.n_levels.copy()
        self.mu_ = X.mean(0) if n else np.zeros(X.shape[1])
        sd = X.std(0) if n else np.ones(X.shape[1])
        self.sd_ = np.where(sd > 0, sd, 1.0)
        self.C_ = schema.n_classes
        A = self._design(X)
        w = _weights(sample_weight, n)
        Y = np.zeros((n, self.C_))
        Y[np.arange(n), y] = 1.0
        self.W_ = np.zeros((A.shape[1], self.C_))
        for _ in range(self.epochs):
            _charge(budget, n)
            perm = rng.permutation(n)
            for s in range(0, n, self.batch_size):
                b = perm[s:s + self.batch_size]
                Z = A[b] @ self.W_
                Z -= Z.max(1, keepdims=True)
                P = np.exp(Z)
                P /= P.sum(1, keepdims=True)
                G = A[b].T @ ((P - Y[b]) * w[b][:, None]) / len(b) + self.l2 * self.W_
                self.W_ -= self.learning_rate * G
        return self

    def scores(self, X, budget=None):
        _charge(budget, len(X))
        return self._design(X) @ self.W_
