"""SMAC-style strategy: forest surrogate, EI local search, random interleaving, fold racing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..evaluator import RunHistory, TrajectoryEntry
from ..smbo import OptimizerStrategy, Session, fresh_random
from ..space import Config, ParamSpace, neighbors
from .acquisition import expected_improvement
from .forest import FEATURE_FRACTION, MIN_LEAF, N_TREES, fit_forest

N_RANDOM_CANDIDATES = 1000
N_STARTS = 10
MAX_CLIMB = 20


@dataclass
class IncumbentState:
    config: Config | None = None
    folds: list[int] = field(default_factory=list)

    @property
    def id(self) -> str | None:
        return None if self.config is None else self.config.id


@dataclass
class SearchPath:
    """EI values visited by one hill climb, start first."""

    eis: list[float]


def local_search(space: ParamSpace, score, starts: list[Config], rng: np.random.Generator,
                 max_steps: int = MAX_CLIMB):
    """Best-improvement hill climbing on ``score`` from each start.

    ``score`` maps a list of configs to an array of EI values.  Returns the
    end point and EI of every climb plus the visited EI sequences.
    """
    ends, paths = [], []
    start_scores = score(starts)
    for cfg, ei in zip(starts, start_scores):
        path = [float(ei)]
        for _ in range(max_steps):
            nbrs = neighbors(space, cfg, rng)
            if not nbrs:
                break
            vals = score(nbrs)
            j = int(np.argmax(vals))
            if not vals[j] > ei:
                break
            cfg, ei = nbrs[j], float(vals[j])
            path.append(ei)
        ends.append((cfg, ei))
        paths.append(SearchPath(path))
    return ends, paths


class SMAC(OptimizerStrategy):
    """Odd steps draw from the priors; even steps maximize EI under the forest.

    Proposals are raced against the incumbent fold by fold (see
    :meth:`evaluate`).
    """

    name = "smac"
    full_cv = False

    def __init__(self, n_trees: int = N_TREES, min_leaf: int = MIN_LEAF,
                 feature_fraction: float = FEATURE_FRACTION,
                 n_random: int = N_RANDOM_CANDIDATES, n_starts: int = N_STARTS,
                 max_climb: int = MAX_CLIMB, keep_paths: bool = False):
        self.forest_args = dict(n_trees=n_trees, min_leaf=min_leaf, feature_fraction=feature_fraction)
        self.n_random = n_random
        self.n_starts = n_starts
        self.max_climb = max_climb
        self.keep_paths = keep_paths

    def initialize(self, space: ParamSpace, seed: int) -> None:
        super().initialize(space, seed)
        self.state = IncumbentState()
        self.races: list[dict] = []
        self.paths: list[list[SearchPath]] = []

    # -- proposal ------------------------------------------------------------

    def c_min(self, history: RunHistory) -> float:
        return history.mean_loss(self.state.id)

    def propose(self, history: RunHistory) -> Config:
        self.step += 1
        if self.step % 2 == 1 or self.state.config is None:
            return fresh_random(self.space, self.rng, history)
        forest = fit_forest(history, self.space, self.rng, **self.forest_args)
        c_min = self.c_min(history)
        cache: dict[str, float] = {}

        def score(configs):
            todo = [c for c in configs if c.key not in cache]
            if todo:
                mu, var = forest.predict(self.space.encode_many(todo))
                for c, v in zip(todo, expected_improvement(mu, np.sqrt(var), c_min)):
                    cache[c.key] = float(v)
            return np.array([cache[c.key] for c in configs])

        evaluated = [history.configs[c] for c in history.evaluated_ids()]
        X = np.vstack([self.space.encode_many(evaluated),
                       self.space.sample_encoded(self.n_random, self.rng)])
        mu, var = forest.predict(X)
        pool_scores = expected_improvement(mu, np.sqrt(var), c_min)
        ranked = np.argsort(-pool_scores, kind="stable")

        def pool_config(i):
            return evaluated[i] if i < len(evaluated) else self.space.decode(X[i])

        starts = [pool_config(i) for i in ranked[: self.n_starts]]
        ends, paths = local_search(self.space, score, starts, self.rng, self.max_climb)
        if self.keep_paths:
            self.paths.append(paths)
        # best unevaluated climb end, else the best unevaluated pool member
        for cfg, _ in sorted(ends, key=lambda e: -e[1]):
            if not history.folds_of(cfg.id):
                return cfg
        for i in ranked:
            if i >= len(evaluated):
                return pool_config(i)
        return fresh_random(self.space, self.rng, history)

    # -- intensification -----------------------------------------------------

    def evaluate(self, config: Config, session: Session) -> dict[int, float]:
        """Race ``config`` against the incumbent; see :func:`intensify`."""
        intensify(config, self.state, session, self.races, owner=self)
        return session.history.fold_losses(config.id)

    def observe(self, config, losses, session) -> None:
        pass

    def extras(self) -> dict:
        return {"races": self.races}


def intensify(challenger: Config, state: IncumbentState, session: Session,
              log: list | None = None, owner=None) -> IncumbentState:
    """One racing round.

    The challenger is evaluated on the incumbent's folds in order and is
    dropped as soon as its running mean exceeds the incumbent's mean on the
    same folds.  It replaces the incumbent only after covering every
    incumbent fold with a strictly lower mean.  Whoever holds the title
    afterwards is evaluated on one more fold, up to k.  ``owner.state`` is
    updated before that extra fold, so an exhausted budget cannot lose a
    replacement.
    """
    history = session.history
    if state.config is None:
        session.loss(challenger, 0)
        history.add_incumbent(TrajectoryEntry(session.used, challenger.id,
                                              history.mean_loss(challenger.id, [0]), 1))
        state = IncumbentState(challenger, [0])
        if owner is not None:
            owner.state = state
        return state
    inc, folds = state.config, list(state.folds)
    if challenger.id != inc.id:
        survived = True
        for i, f in enumerate(folds):
            session.loss(challenger, f)
            shared = folds[: i + 1]
            if history.mean_loss(challenger.id, shared) > history.mean_loss(inc.id, shared):
                survived = False
                break
        if survived:
            c_mean = history.mean_loss(challenger.id, folds)
            i_mean = history.mean_loss(inc.id, folds)
            if c_mean < i_mean:
                history.add_incumbent(TrajectoryEntry(session.used, challenger.id, c_mean,
                                                      len(folds), i_mean))
                if log is not None:
                    log.append({"evaluations": session.used, "challenger": challenger.id,
                                "incumbent": inc.id, "folds": list(folds),
                                "challenger_mean": c_mean, "incumbent_mean": i_mean})
                inc = challenger
    state = IncumbentState(inc, folds)
    if owner is not None:
        owner.state = state
    if len(folds) < session.k:
        nxt = next(f for f in range(session.k) if f not in folds)
        session.loss(inc, nxt)
        folds.append(nxt)
    return state
