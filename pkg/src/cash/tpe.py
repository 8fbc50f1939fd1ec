"""TPE-style optimizer: quantile split of the history and Parzen density ratios.

Observations are split at the gamma-quantile c* of the per-config mean
losses into a good set (loss < c*) and a bad set.  Each set gets one 1-D
estimator per parameter, fed only by configs in which that parameter is
active.  Candidates are drawn from the good-set estimators and the one with
the smallest g/l wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import NonpositiveDensity, TooFewObservations
from .evaluator import RunHistory
from .smbo import OptimizerStrategy, fresh_random
from .space import CATEGORICAL, INTEGER, Config, ParamSpace, ParamSpec, _same

GAMMA = 0.15
N_CANDIDATES = 24
N_STARTUP = 10
# kernel widths are clipped to [span / min(MAX_SHRINK, m + 1), span]
MAX_SHRINK = 100

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass
class HistorySplit:
    good: list[tuple[Config, float]]
    bad: list[tuple[Config, float]]
    threshold: float
    gamma: float = GAMMA

    @property
    def n(self) -> int:
        return len(self.good) + len(self.bad)


def quantile_index(gamma: float, n: int) -> int:
    """Position of c* in the sorted losses: ceil(gamma * n), kept below n."""
    return min(max(math.ceil(gamma * n - 1e-9), 0), n - 1)


def split_observations(observations: Sequence[tuple[Config, float]], gamma: float = GAMMA) -> HistorySplit:
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if len(observations) < 2:
        raise TooFewObservations(f"need at least 2 observations, have {len(observations)}")
    losses = sorted(loss for _, loss in observations)
    c_star = losses[quantile_index(gamma, len(losses))]
    good = [(c, loss) for c, loss in observations if loss < c_star]
    bad = [(c, loss) for c, loss in observations if loss >= c_star]
    return HistorySplit(good, bad, c_star, gamma)


def split_history(history: RunHistory, gamma: float = GAMMA, k: int | None = None) -> HistorySplit:
    """Split on per-config mean CV losses.  With ``k``, only configs scored on all k folds count."""
    obs = []
    for cid in history.evaluated_ids():
        if k is not None and len(history.folds_of(cid)) < k:
            continue
        obs.append((history.configs[cid], history.mean_loss(cid)))
    return split_observations(obs, gamma)


# -- 1-D estimators ----------------------------------------------------------


@dataclass
class ContinuousParzen:
    """Mixture of truncated Gaussians plus one uniform prior component on [lo, hi].

    Coordinates are the parameter's prior scale (ln for log priors).  Integer
    parameters use the widened interval [lo - 0.5, hi + 0.5] and report the
    mass of each value's unit bin.
    """

    lo: float
    hi: float
    mus: np.ndarray
    sigmas: np.ndarray
    integer: bool = False
    log: bool = False

    @property
    def n_obs(self) -> int:
        return len(self.mus)

    @property
    def weights(self) -> np.ndarray:
        m = self.n_obs
        return np.full(m + 1, 1.0 / (m + 1))

    def _mass(self):
        a = (self.lo - self.mus) / self.sigmas
        b = (self.hi - self.mus) / self.sigmas
        return ndtr(b) - ndtr(a)

    def pdf(self, t) -> np.ndarray:
        """Density at prior-scale points ``t`` (zero outside [lo, hi])."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        w = 1.0 / (self.n_obs + 1)
        out = np.full(t.shape, w / (self.hi - self.lo))
        if self.n_obs:
            z = (t[:, None] - self.mus) / self.sigmas
            k = _INV_SQRT_2PI * np.exp(-0.5 * z * z) / (self.sigmas * self._mass())
            out = out + w * k.sum(axis=1)
        out[(t < self.lo) | (t > self.hi)] = 0.0
        return out

    def cdf(self, t) -> np.ndarray:
        t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), self.lo, self.hi)
        w = 1.0 / (self.n_obs + 1)
        out = w * (t - self.lo) / (self.hi - self.lo)
        if self.n_obs:
            a = ndtr((self.lo - self.mus) / self.sigmas)
            part = (ndtr((t[:, None] - self.mus) / self.sigmas) - a) / self._mass()
            out = out + w * part.sum(axis=1)
        return out

    def value_density(self, value) -> float:
        """Density (or, for integers, bin mass) of one parameter value."""
        if self.integer:
            lo_edge, hi_edge = value - 0.5, value + 0.5
            if self.log:
                lo_edge, hi_edge = math.log(lo_edge), math.log(hi_edge)
            c = self.cdf([lo_edge, hi_edge])
            return float(c[1] - c[0])
        t = math.log(value) if self.log else float(value)
        return float(self.pdf([t])[0])

    def sample(self, rng: np.random.Generator) -> float:
        """One prior-scale draw."""
        j = int(rng.integers(self.n_obs + 1))
        if j == self.n_obs:
            return float(rng.uniform(self.lo, self.hi))
        mu, s = self.mus[j], self.sigmas[j]
        a, b = ndtr((self.lo - mu) / s), ndtr((self.hi - mu) / s)
        u = rng.uniform(a, b)
        return float(np.clip(mu + s * ndtri(u), self.lo, self.hi))


@dataclass
class DiscreteParzen:
    levels: tuple
    counts: np.ndarray

    @property
    def n_obs(self) -> int:
        return int(self.counts.sum())

    @property
    def probs(self) -> np.ndarray:
        smoothed = self.counts + 1.0
        return smoothed / smoothed.sum()

    def value_density(self, value) -> float:
        for i, lv in enumerate(self.levels):
            if _same(lv, value):
                return float(self.probs[i])
        raise KeyError(value)

    def sample(self, rng: np.random.Generator):
        return self.levels[int(rng.choice(len(self.levels), p=self.probs))]


def bandwidths(points: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Larger gap to each sorted point's neighbours; the domain ends act as neighbours."""
    ext = np.concatenate([[lo], points, [hi]])
    return np.maximum(ext[1:-1] - ext[:-2], ext[2:] - ext[1:-1])


def continuous_parzen(spec: ParamSpec, values: Sequence) -> ContinuousParzen:
    integer = spec.kind == INTEGER
    lo, hi = (spec.lo - 0.5, spec.hi + 0.5) if integer else (spec.lo, spec.hi)
    if spec.log:
        lo, hi = math.log(lo), math.log(hi)
    pts = np.sort(np.array([spec.transform(v) for v in values], dtype=float))
    span = hi - lo
    sig = bandwidths(pts, lo, hi) if len(pts) else np.zeros(0)
    sig = np.clip(sig, span / min(MAX_SHRINK, len(pts) + 1), span)
    return ContinuousParzen(lo, hi, pts, sig, integer, spec.log)


def discrete_parzen(spec: ParamSpec, values: Sequence) -> DiscreteParzen:
    counts = np.zeros(len(spec.levels))
    for v in values:
        counts[spec.level_index(v)] += 1
    return DiscreteParzen(spec.levels, counts)


@dataclass
class DensityTree:
    """One 1-D estimator per parameter; only active occurrences feed each."""

    nodes: dict = field(default_factory=dict)
    n_configs: int = 0

    def __getitem__(self, name):
        return self.nodes[name]


def build_parzen(configs: Sequence[Mapping], space: ParamSpace) -> DensityTree:
    tree = DensityTree(n_configs=len(configs))
    for p in space.params:
        values = [c[p.name] for c in configs if p.name in c]
        tree.nodes[p.name] = (discrete_parzen(p, values) if p.kind == CATEGORICAL
                              else continuous_parzen(p, values))
    return tree


def density(tree: DensityTree, space: ParamSpace, config: Mapping, trace: list | None = None) -> float:
    """Product of the 1-D densities of the config's active parameters.

    Parameters are visited root first; ``trace`` collects the names used.
    """
    out = 1.0
    for p in space.topological():
        if p.name not in config:
            continue
        if trace is not None:
            trace.append(p.name)
        out *= tree[p.name].value_density(config[p.name])
    return out


def log_density(tree: DensityTree, space: ParamSpace, config: Mapping) -> float:
    return sum(math.log(tree[name].value_density(v)) for name, v in config.items())


def sample_tree(tree: DensityTree, space: ParamSpace, rng: np.random.Generator) -> Config:
    """Ancestral draw: each newly active parameter from its estimator."""
    out: dict = {}
    for p in space.topological():
        if all(c.parent in out and c.holds(out[c.parent]) for c in p.conditions):
            node = tree[p.name]
            out[p.name] = (node.sample(rng) if p.kind == CATEGORICAL
                           else p.from_transformed(node.sample(rng)))
    return Config(out)


def ei_score(gamma: float, l_density: float, g_density: float) -> float:
    """(gamma + (g / l)(1 - gamma))^-1, proportional to expected improvement."""
    if not l_density > 0:
        raise NonpositiveDensity(f"l density {l_density} is not positive")
    return 1.0 / (gamma + (g_density / l_density) * (1.0 - gamma))


def rank_candidates(candidates: Sequence[Config], good: DensityTree, bad: DensityTree,
                    space: ParamSpace) -> np.ndarray:
    """log g - log l per candidate (smaller is better)."""
    return np.array([log_density(bad, space, c) - log_density(good, space, c) for c in candidates])


def propose_tpe(split: HistorySplit, space: ParamSpace, gamma: float = GAMMA,
                n_candidates: int = N_CANDIDATES, rng: np.random.Generator | None = None,
                exclude=None) -> Config:
    """Draw candidates from l and return the one minimizing g/l (first on ties).

    ``exclude`` is an optional predicate; excluded candidates are skipped
    unless every candidate is excluded.
    """
    rng = np.random.default_rng() if rng is None else rng
    good = build_parzen([c for c, _ in split.good], space)
    bad = build_parzen([c for c, _ in split.bad], space)
    cands = [sample_tree(good, space, rng) for _ in range(max(1, n_candidates))]
    ratio = rank_candidates(cands, good, bad, space)
    for i in np.argsort(ratio, kind="stable"):
        if exclude is None or not exclude(cands[i]):
            return cands[i]
    return cands[int(np.argmin(ratio))]


class TPE(OptimizerStrategy):
    """Random start-up draws, then density-ratio proposals; every proposal gets full CV."""

    name = "tpe"

    def __init__(self, gamma: float = GAMMA, n_candidates: int = N_CANDIDATES,
                 n_startup: int = N_STARTUP):
        self.gamma = gamma
        self.n_candidates = n_candidates
        self.n_startup = n_startup

    def propose(self, history: RunHistory) -> Config:
        self.step += 1
        if len(history.evaluated_ids()) < max(2, self.n_startup):
            return fresh_random(self.space, self.rng, history)
        split = split_history(history, self.gamma)
        return propose_tpe(split, self.space, self.gamma, self.n_candidates, self.rng,
                           exclude=lambda c: bool(history.folds_of(c.id)))
