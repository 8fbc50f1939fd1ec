"""Feature selection run before any classifier is built.

A search method (``ranker`` or ``greedy_forward``) is paired with an
attribute evaluator (``info_gain`` or ``pearson_correlation``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_BINS = 10
RANKER = "ranker"
GREEDY_FORWARD = "greedy_forward"
INFO_GAIN = "info_gain"
PEARSON = "pearson_correlation"


@dataclass(frozen=True)
class FeatSelConfig:
    search: str = RANKER
    evaluator: str = INFO_GAIN
    keep_fraction: float = 0.5
    max_fraction: float = 1.0

    def __post_init__(self):
        if self.search not in (RANKER, GREEDY_FORWARD):
            raise ValueError(f"unknown search {self.search!r}")
        if self.evaluator not in (INFO_GAIN, PEARSON):
            raise ValueError(f"unknown evaluator {self.evaluator!r}")
        if not 0.0 < self.keep_fraction <= 1.0 or not 0.0 < self.max_fraction <= 1.0:
            raise ValueError("fractions must lie in (0, 1]")


@dataclass(frozen=True)
class FeatureSelector:
    columns: tuple[int, ...]

    def transform(self, X: np.ndarray) -> np.ndarray:
        return X[:, list(self.columns)]

    @property
    def arity(self) -> int:
        return len(self.columns)


def discretize(x: np.ndarray, categorical: bool, n_bins: int = N_BINS) -> np.ndarray:
    """Integer codes: categorical values as-is, numeric ones by equal-width bins."""
    if categorical:
        return x.astype(np.int64)
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        return np.zeros(len(x), dtype=np.int64)
    return np.minimum(((x - lo) / (hi - lo) * n_bins).astype(np.int64), n_bins - 1)


def entropy(codes: np.ndarray) -> float:
    counts = np.bincount(codes)
    p = counts[counts > 0] / len(codes)
    return float(-(p * np.log2(p)).sum())


def conditional_entropy(y: np.ndarray, codes: np.ndarray) -> float:
    """H(Y | X) for integer-coded X."""
    n = len(y)
    h = 0.0
    for v in np.unique(codes):
        m = codes == v
        h += m.sum() / n * entropy(y[m])
    return h


def info_gain(x: np.ndarray, y: np.ndarray, categorical: bool = False) -> float:
    """H(Y) - H(Y | X) with X binned into equal-width intervals if numeric."""
    codes = discretize(x, categorical)
    return entropy(y) - conditional_entropy(y, codes)


def _abs_corr(a: np.ndarray, b: np.ndarray) -> float:
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(abs(((a - a.mean()) * (b - b.mean())).mean() / (sa * sb)))


def pearson_score(x: np.ndarray, y: np.ndarray, n_classes: int, categorical: bool = False,
                  n_levels: int = 0) -> float:
    """Class-prior weighted |corr| between the attribute and each class indicator.

    Categorical attributes are expanded into level indicators whose scores
    are averaged with level-frequency weights.
    """
    n = len(y)
    prior = np.bincount(y, minlength=n_classes) / n
    if categorical:
        codes = x.astype(np.int64)
        freq = np.bincount(codes, minlength=n_levels) / n
        cols = [((codes == v).astype(float), freq[v]) for v in range(n_levels) if freq[v] > 0]
    else:
        cols = [(x.astype(float), 1.0)]
    score = 0.0
    for col, fw in cols:
        score += fw * sum(prior[c] * _abs_corr(col, (y == c).astype(float))
                          for c in range(n_classes) if prior[c] > 0)
    return score


def attribute_scores(evaluator: str, data) -> np.ndarray:
    X, y = data.features, data.labels
    out = np.zeros(data.n_attributes)
    for j, attr in enumerate(data.attributes):
        if evaluator == INFO_GAIN:
            out[j] = info_gain(X[:, j], y, attr.is_categorical)
        else:
            out[j] = pearson_score(X[:, j], y, data.n_classes, attr.is_categorical, attr.n_levels)
    return out


def _symmetric_uncertainty(a: np.ndarray, b: np.ndarray) -> float:
    ha, hb = entropy(a), entropy(b)
    if ha + hb == 0:
        return 0.0
    return 2.0 * (ha - conditional_entropy(a, b)) / (ha + hb)


def _cfs_merit(rcf: np.ndarray, rff: np.ndarray, subset: list[int]) -> float:
    k = len(subset)
    if k == 0:
        return 0.0
    mean_cf = rcf[subset].mean()
    if k == 1:
        return float(mean_cf)
    block = rff[np.ix_(subset, subset)]
    mean_ff = (block.sum() - np.trace(block)) / (k * (k - 1))
    return float(k * mean_cf / math.sqrt(k + k * (k - 1) * mean_ff))


def _subset_correlations(evaluator: str, data):
    """Attribute-class and attribute-attribute relevance for subset merit."""
    d = data.n_attributes
    y = data.labels
    if evaluator == INFO_GAIN:
        codes = [discretize(data.features[:, j], a.is_categorical)
                 for j, a in enumerate(data.attributes)]
        rcf = np.array([_symmetric_uncertainty(c, y) for c in codes])
        rff = np.eye(d)
        for i in range(d):
            for j in range(i + 1, d):
                rff[i, j] = rff[j, i] = _symmetric_uncertainty(codes[i], codes[j])
    else:
        rcf = attribute_scores(PEARSON, data)
        rff = np.eye(d)
        for i in range(d):
            for j in range(i + 1, d):
                rff[i, j] = rff[j, i] = _abs_corr(data.features[:, i], data.features[:, j])
    return rcf, rff


def select_features(cfg: FeatSelConfig, data, seed: int = 0, budget=None) -> FeatureSelector:
    """Fit a selector on ``data``; the result always keeps at least one attribute.

    ``seed`` is accepted for interface symmetry; both searches are
    deterministic (ties go to the lower attribute index).
    """
    d = data.n_attributes
    if d == 0:
        raise ValueError("no attributes to select from")
    if budget is not None:
        budget.charge(data.n_instances * d)
    if cfg.search == RANKER:
        scores = attribute_scores(cfg.evaluator, data)
        keep = max(1, math.ceil(cfg.keep_fraction * d - 1e-9))
        order = np.argsort(-scores, kind="stable")[:keep]
        return FeatureSelector(tuple(sorted(int(j) for j in order)))

    if budget is not None:
        budget.charge(data.n_instances * d * d)
    rcf, rff = _subset_correlations(cfg.evaluator, data)
    cap = max(1, math.ceil(cfg.max_fraction * d - 1e-9))
    chosen: list[int] = []
    merit = 0.0
    while len(chosen) < cap:
        best_j, best_m = None, -np.inf
        for j in range(d):
            if j in chosen:
                continue
            m = _cfs_merit(rcf, rff, chosen + [j])
            if m > best_m + 1e-12:
                best_j, best_m = j, m
        if best_j is None or (chosen and best_m <= merit + 1e-12):
            break
        chosen.append(best_j)
        merit = best_m
    return FeatureSelector(tuple(sorted(chosen)))
