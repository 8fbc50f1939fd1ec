"""Meta-learners (AdaBoost.M1, Bagging) and the voting ensemble."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .classifiers import Classifier, _charge, _weights


def _vote(preds: list[np.ndarray], weights, n_classes: int) -> np.ndarray:
    out = np.zeros((len(preds[0]), n_classes))
    rows = np.arange(len(preds[0]))
    for p, a in zip(preds, weights):
        out[rows, p] += a
    return out


class AdaBoostM1(Classifier):
    """AdaBoost.M1 with reweighting.

    Stops early when a round's weighted error is 0 (that model alone is
    kept with a large vote) or reaches 1/2.
    """

    name = "adaboost_m1"

    def __init__(self, make_base: Callable[[], Classifier], iterations: int = 10):
        self.make_base = make_base
        self.iterations = iterations

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        n = len(y)
        w = _weights(sample_weight, n) / n
        self.models_, self.alphas_ = [], []
        self.weight_sums_ = []
        self.C_ = schema.n_classes
        for _ in range(self.iterations):
            h = self.make_base().fit(X, y, schema, sample_weight=w * n, budget=budget, rng=rng)
            miss = h.predict(X, budget) != y
            err = float(w[miss].sum())
            if err <= 0.0:
                if not self.models_:
                    self.models_, self.alphas_ = [h], [1.0]
                else:
                    self.models_.append(h)
                    self.alphas_.append(math.log(1e10))
                break
            if err >= 0.5:
                if not self.models_:
                    self.models_, self.alphas_ = [h], [1.0]
                break
            beta = err / (1.0 - err)
            self.models_.append(h)
            self.alphas_.append(math.log(1.0 / beta))
            w = np.where(miss, w, w * beta)
            w = w / w.sum()
            self.weight_sums_.append(float(w.sum()))
        return self

    def scores(self, X, budget=None):
        return _vote([m.predict(X, budget) for m in self.models_], self.alphas_, self.C_)


class Bagging(Classifier):
    """Bootstrap aggregation with majority vote over the bags.

    ``bag_fraction == 1.0`` with a single bag trains the base learner on the
    unmodified training set (no resampling).
    """

    name = "bagging"

    def __init__(self, make_base: Callable[[], Classifier], iterations: int = 10,
                 bag_fraction: float = 1.0):
        self.make_base = make_base
        self.iterations = iterations
        self.bag_fraction = bag_fraction

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        n = len(y)
        w = _weights(sample_weight, n)
        self.C_ = schema.n_classes
        self.models_ = []
        if self.iterations == 1 and self.bag_fraction >= 1.0:
            self.models_.append(self.make_base().fit(X, y, schema, sample_weight=w,
                                                     budget=budget, rng=rng))
            return self
        size = max(1, int(round(self.bag_fraction * n)))
        p = w / w.sum()
        for _ in range(self.iterations):
            _charge(budget, size)
            idx = rng.choice(n, size=size, replace=True, p=p)
            self.models_.append(self.make_base().fit(X[idx], y[idx], schema,
                                                     budget=budget, rng=rng))
        return self

    def scores(self, X, budget=None):
        return _vote([m.predict(X, budget) for m in self.models_],
                     [1.0] * len(self.models_), self.C_)


class Voting(Classifier):
    name = "voting"

    def __init__(self, bases: list[Classifier]):
        self.bases = bases

    def fit(self, X, y, schema, sample_weight=None, budget=None, rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.C_ = schema.n_classes
        for b in self.bases:
            b.fit(X, y, schema, sample_weight=sample_weight, budget=budget, rng=rng)
        return self

    def scores(self, X, budget=None):
        return _vote([b.predict(X, budget) for b in self.bases], [1.0] * len(self.bases), self.C_)
