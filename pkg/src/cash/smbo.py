"""The generic SMBO loop, run results and run-level statistics."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, stratified_folds
from .errors import BudgetExhausted, ConfigError, EmptyInput, LengthMismatch
from .evaluator import (
    DEFAULT_FOLD_BUDGET,
    DEFAULT_K,
    CVEvaluator,
    RunHistory,
    TrajectoryEntry,
)
from .learners.classifiers import Budget
from .learners.roster import misclassification_rate, train
from .space import Config, ParamSpace, sample_random

# consecutive proposals that cost no evaluation before a run gives up
MAX_STALE = 100
# resampling attempts when a random draw repeats an evaluated config
MAX_RESAMPLE = 50


class BudgetSpent(Exception):
    """Raised inside a run when the fold-evaluation budget is used up."""


class Session:
    """Budgeted, history-backed access to fold losses during one run.

    A (config, fold) pair already in the history is answered from it and
    costs nothing; every other request spends one unit of budget.
    """

    def __init__(self, evaluator, history: RunHistory, budget: int):
        self.evaluator = evaluator
        self.history = history
        self.budget = int(budget)
        self.used = 0

    @property
    def k(self) -> int:
        return self.evaluator.k

    @property
    def remaining(self) -> int:
        return self.budget - self.used

    def loss(self, config: Config, fold: int) -> float:
        cid = self.history.register(config)
        if not self.history.has(cid, fold):
            if self.remaining <= 0:
                raise BudgetSpent()
            self.history.append(self.evaluator.evaluate(config, fold))
            self.used += 1
        return self.history.fold_losses(cid)[fold]

    def cross_validate(self, config: Config) -> dict[int, float]:
        return {f: self.loss(config, f) for f in range(self.k)}


class OptimizerStrategy:
    """Interface of an optimizer plugged into :func:`optimize`.

    The default evaluation scores a proposal on all k folds, and the default
    incumbent rule accepts a fully evaluated config whose mean is strictly
    lower than the incumbent's.
    """

    name = "strategy"
    full_cv = True

    def initialize(self, space: ParamSpace, seed: int) -> None:
        self.space = space
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.step = 0

    def propose(self, history: RunHistory) -> Config:
        raise NotImplementedError

    def folds_needed(self, k: int) -> int:
        """Budget a proposal needs before the loop will make it."""
        return k if self.full_cv else 1

    def evaluate(self, config: Config, session: Session) -> dict[int, float]:
        return session.cross_validate(config)

    def observe(self, config: Config, losses: Mapping[int, float], session: Session) -> None:
        history = session.history
        if len(losses) < session.k:
            return
        cid = config.id
        mean = history.mean_loss(cid, range(session.k))
        inc = history.incumbent_id
        if inc is None:
            history.add_incumbent(TrajectoryEntry(session.used, cid, mean, session.k))
            return
        inc_mean = history.mean_loss(inc, range(session.k))
        if cid != inc and mean < inc_mean:
            history.add_incumbent(TrajectoryEntry(session.used, cid, mean, session.k, inc_mean))

    def extras(self) -> dict:
        """Strategy-specific data kept in the run result."""
        return {}


def fresh_random(space: ParamSpace, rng: np.random.Generator, history: RunHistory) -> Config:
    """A prior draw not yet evaluated, if one turns up within a few tries."""
    cfg = sample_random(space, rng)
    for _ in range(MAX_RESAMPLE):
        if not history.folds_of(cfg.id):
            break
        cfg = sample_random(space, rng)
    return cfg


class RandomStrategy(OptimizerStrategy):
    """Random search: independent draws from the priors, each fully cross-validated."""

    name = "random"

    def propose(self, history: RunHistory) -> Config:
        self.step += 1
        return fresh_random(self.space, self.rng, history)


@dataclass
class RunResult:
    method: str
    seed: int
    history: RunHistory
    evaluations: int
    extras: dict = field(default_factory=dict)

    @property
    def trajectory(self) -> list[TrajectoryEntry]:
        return self.history.trajectory

    @property
    def incumbent_id(self) -> str | None:
        return self.history.incumbent_id

    @property
    def incumbent(self) -> Config | None:
        cid = self.incumbent_id
        return None if cid is None else self.history.configs[cid]

    @property
    def incumbent_loss(self) -> float:
        """Mean CV loss of the incumbent over its evaluated folds (inf if none)."""
        cid = self.incumbent_id
        return math.inf if cid is None else self.history.mean_loss(cid)

    @property
    def incumbent_folds(self) -> int:
        cid = self.incumbent_id
        return 0 if cid is None else len(self.history.folds_of(cid))

    def to_dict(self, include_times: bool = False, describe: Callable | None = None) -> dict:
        inc = self.incumbent
        incumbent = None
        if inc is not None:
            incumbent = {"id": inc.id, "values": inc.to_dict(),
                         "mean_loss": self.incumbent_loss, "n_folds": self.incumbent_folds}
            if describe is not None:
                incumbent["description"] = describe(inc)
        return {
            "method": self.method,
            "seed": self.seed,
            "evaluations": self.evaluations,
            "incumbent": incumbent,
            "trajectory": [t.to_dict() for t in self.trajectory],
            "history": self.history.to_lines(include_times),
            "extras": self.extras,
        }

    def to_json(self, include_times: bool = False, describe: Callable | None = None) -> str:
        return json.dumps(self.to_dict(include_times, describe), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunResult":
        return cls(d["method"], int(d["seed"]), RunHistory.from_lines(d["history"]),
                   int(d["evaluations"]), dict(d.get("extras", {})))

    @classmethod
    def from_json(cls, text: str) -> "RunResult":
        return cls.from_dict(json.loads(text))


def optimize(strategy: OptimizerStrategy, space: ParamSpace, evaluator, budget: int,
             seed: int = 0, max_stale: int = MAX_STALE,
             time_limit: float | None = None) -> RunResult:
    """Propose, evaluate and observe until ``budget`` fold evaluations are spent.

    ``evaluator`` needs a ``k`` attribute and ``evaluate(config, fold)``
    returning a :class:`~cash.evaluator.FoldLossRecord`.  ``time_limit``
    (seconds) is an optional second stop condition; using it gives up
    run-to-run reproducibility.
    """
    k = evaluator.k
    if budget < k:
        raise ConfigError(f"budget {budget} is below one cross-validation ({k} folds)")
    history = RunHistory()
    session = Session(evaluator, history, budget)
    strategy.initialize(space, seed)
    stale = 0
    deadline = None if time_limit is None else time.monotonic() + time_limit
    while session.remaining >= strategy.folds_needed(k):
        if deadline is not None and time.monotonic() > deadline:
            break
        config = strategy.propose(history)
        before = session.used
        try:
            losses = strategy.evaluate(config, session)
        except BudgetSpent:
            break
        strategy.observe(config, losses, session)
        stale = stale + 1 if session.used == before else 0
        if stale >= max_stale:
            break
    return RunResult(strategy.name, seed, history, session.used, strategy.extras())


def run_smbo(strategy: OptimizerStrategy, space: ParamSpace, data: Dataset, k: int = DEFAULT_K,
             budget: int = 100, seed: int = 0, fold_budget: int | None = DEFAULT_FOLD_BUDGET) -> RunResult:
    """Optimize over ``data`` with a stratified k-fold plan drawn from ``seed``."""
    evaluator = CVEvaluator(data, stratified_folds(data, k, seed), fold_budget, seed)
    return optimize(strategy, space, evaluator, budget, seed)


def best_of_runs(results: Sequence[RunResult]) -> RunResult:
    """The run whose incumbent has the lowest mean CV loss; ties go to the lower seed."""
    if not results:
        raise EmptyInput("no runs to choose from")
    return min(results, key=lambda r: (r.incumbent_loss, r.seed))


def spearman_rank(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Spearman's rho with average ranks for ties.

    Returns ``None`` when the coefficient is undefined: fewer than two
    points, or a sequence with no variation.
    """
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise LengthMismatch(f"lengths {xs.size} and {ys.size} differ")
    if xs.size < 2:
        return None
    rx, ry = rankdata(xs) - (xs.size + 1) / 2, rankdata(ys) - (ys.size + 1) / 2
    den = math.sqrt(float(np.dot(rx, rx)) * float(np.dot(ry, ry)))
    if den == 0.0:
        return None
    return float(np.clip(np.dot(rx, ry) / den, -1.0, 1.0))


def validation_loss(config: Config, inner: Dataset, validation: Dataset, seed: int = 0,
                    budget: int | None = DEFAULT_FOLD_BUDGET) -> float:
    """Train on ``inner`` and return the error on ``validation``; 1.0 on budget exhaustion."""
    meter = Budget(budget)
    try:
        return misclassification_rate(train(config, inner, meter, seed), validation, meter)
    except BudgetExhausted:
        return 1.0


def overfit_signal(history: RunHistory, inner: Dataset | None = None,
                   validation: Dataset | None = None, seed: int = 0,
                   budget: int | None = DEFAULT_FOLD_BUDGET,
                   loss_fn: Callable[[Config], float] | None = None):
    """CV losses and held-out losses along the incumbent trajectory, and their rho.

    Each trajectory incumbent is retrained on ``inner`` and scored on
    ``validation``; ``loss_fn`` replaces that step when given.
    """
    if loss_fn is None:
        def loss_fn(cfg):
            return validation_loss(cfg, inner, validation, seed, budget)
    cv = [t.mean_loss for t in history.trajectory]
    held = [float(loss_fn(history.configs[t.config_id])) for t in history.trajectory]
    return cv, held, spearman_rank(cv, held)
