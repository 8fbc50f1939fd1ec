"""Ex-Def and Random Grid.

Ex-Def cross-validates every roster entry at its default hyperparameters
and keeps the best.  Random Grid discretizes each learner's own
hyperparameters (at most 10 values per numeric one), then searches the union
of those grids at random after first trying all the defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .learners.roster import (
    BASE_LEARNERS,
    BASE_SLOT,
    CLASS,
    META_BASE,
    META_LEARNERS,
    ROOT,
    ROSTER,
    default_config,
    space_of_learners,
)
from .smbo import MAX_RESAMPLE, OptimizerStrategy, RunResult, optimize
from .space import CATEGORICAL, INTEGER, Config, ParamSpace, ParamSpec

GRID_POINTS = 10


def grid_values(spec: ParamSpec, points: int = GRID_POINTS) -> tuple:
    """At most ``points`` evenly spaced values (log-spaced under a log prior)."""
    if spec.kind == CATEGORICAL:
        return tuple(spec.levels)
    lo, hi = spec.bounds()
    ts = np.linspace(lo, hi, points)
    vals = [spec.from_transformed(t) for t in ts]
    if spec.kind == INTEGER:
        vals = sorted(set(vals))
    return tuple(vals)


def _learner_params(space: ParamSpace, learner: str) -> list[ParamSpec]:
    """The hyperparameters owned by one roster entry (not those of its base)."""
    if learner in BASE_LEARNERS:
        prefix = f"{BASE_SLOT}.{learner}."
    else:
        prefix = f"{learner}."
    return [p for p in space.params if p.name.startswith(prefix)]


@dataclass(frozen=True)
class LearnerGrid:
    learner: str
    base: Config
    names: tuple[str, ...]
    values: tuple[tuple, ...]

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.values)

    def point(self, index: int) -> Config:
        """Mixed-radix decoding of ``index`` into one grid config."""
        if not 0 <= index < self.size:
            raise IndexError(index)
        changes = {}
        for name, vals in zip(reversed(self.names), reversed(self.values)):
            index, r = divmod(index, len(vals))
            changes[name] = vals[r]
        return self.base.replace(**changes)

    def __iter__(self):
        return (self.point(i) for i in range(self.size))


class GridSpec:
    """Union of per-learner grids; meta learners and ensembles keep default bases."""

    def __init__(self, grids: Sequence[LearnerGrid]):
        self.grids = tuple(grids)
        self._cum = np.cumsum([g.size for g in self.grids])

    @classmethod
    def for_learners(cls, space: ParamSpace | None = None, learners=ROSTER,
                     points: int = GRID_POINTS) -> "GridSpec":
        space = space_of_learners() if space is None else space
        grids = []
        for learner in learners:
            params = _learner_params(space, learner)
            grids.append(LearnerGrid(learner, default_config(learner),
                                     tuple(p.name for p in params),
                                     tuple(grid_values(p, points) for p in params)))
        return cls(grids)

    @property
    def size(self) -> int:
        return int(self._cum[-1]) if len(self._cum) else 0

    def point(self, index: int) -> Config:
        g = int(np.searchsorted(self._cum, index, side="right"))
        offset = index - (int(self._cum[g - 1]) if g else 0)
        return self.grids[g].point(offset)

    def sample(self, rng: np.random.Generator) -> Config:
        """A uniform draw from the union."""
        return self.point(int(rng.integers(self.size)))

    def defaults(self) -> list[Config]:
        return [g.base for g in self.grids]


class DefaultsStrategy(OptimizerStrategy):
    """Proposes a fixed list of configs in order, then nothing new."""

    name = "ex_def"

    def __init__(self, configs: Sequence[Config]):
        self.configs = list(configs)

    def propose(self, history):
        self.step += 1
        return self.configs[min(self.step, len(self.configs)) - 1]


class RandomGridStrategy(OptimizerStrategy):
    """All defaults first, then uniform draws from the grid union."""

    name = "random_grid"

    def __init__(self, grid: GridSpec):
        self.grid = grid

    def propose(self, history):
        self.step += 1
        defaults = self.grid.defaults()
        if self.step <= len(defaults):
            return defaults[self.step - 1]
        cfg = self.grid.sample(self.rng)
        for _ in range(MAX_RESAMPLE):
            if not history.folds_of(cfg.id):
                break
            cfg = self.grid.sample(self.rng)
        return cfg


def ex_def_run(evaluator, learners=ROSTER, space: ParamSpace | None = None) -> RunResult:
    """Ex-Def as a run: every default on all k folds, best mean kept."""
    space = space_of_learners() if space is None else space
    configs = [default_config(name) for name in learners]
    strategy = DefaultsStrategy(configs)
    return optimize(strategy, space, evaluator, len(configs) * evaluator.k, seed=0,
                    max_stale=1)


def ex_def(evaluator, learners=ROSTER, space: ParamSpace | None = None):
    """Best default config and the per-learner mean CV losses.

    Ties go to the earlier roster entry.
    """
    run = ex_def_run(evaluator, learners, space)
    table = {name: run.history.mean_loss(default_config(name).id, range(evaluator.k))
             for name in learners}
    best = min(learners, key=lambda n: (table[n], learners.index(n)))
    return default_config(best), table


def random_grid(evaluator, budget: int, seed: int = 0, grid: GridSpec | None = None,
                space: ParamSpace | None = None) -> RunResult:
    if budget < evaluator.k:
        raise ConfigError(f"budget {budget} is below one cross-validation")
    grid = GridSpec.for_learners(space) if grid is None else grid
    space = space_of_learners() if space is None else space
    return optimize(RandomGridStrategy(grid), space, evaluator, budget, seed)
