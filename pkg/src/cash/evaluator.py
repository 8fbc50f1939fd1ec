"""Budgeted per-fold evaluation, run histories and CV aggregation."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .data import Dataset, FoldPlan
from .errors import BudgetExhausted, ConfigError, MissingFold
from .learners.classifiers import Budget
from .learners.roster import misclassification_rate, train
from .space import Config

DEFAULT_K = 10
# instance evaluations allowed per fold; roughly a few seconds of training
DEFAULT_FOLD_BUDGET = 1_000_000


@dataclass(frozen=True)
class FoldLossRecord:
    config_id: str
    fold: int
    loss: float
    budget_exhausted: bool = False
    wall_time: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss <= 1.0:
            raise ValueError(f"loss {self.loss} outside [0, 1]")
        if self.budget_exhausted and self.loss != 1.0:
            raise ValueError("an exhausted evaluation must carry loss 1.0")

    def to_dict(self, include_time: bool = True) -> dict:
        d = asdict(self)
        if not include_time:
            d.pop("wall_time")
        return d


@dataclass(frozen=True)
class TrajectoryEntry:
    """An incumbent change.

    ``mean_loss`` is the new incumbent's mean over its ``n_folds`` evaluated
    folds.  ``replaced_mean`` is the previous incumbent's mean over the same
    folds (``None`` for the first incumbent).
    """

    evaluations: int
    config_id: str
    mean_loss: float
    n_folds: int
    replaced_mean: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


class RunHistory:
    """Append-only store of fold losses, the config registry and the trajectory."""

    def __init__(self):
        self.records: list[FoldLossRecord] = []
        self.configs: dict[str, Config] = {}
        self.trajectory: list[TrajectoryEntry] = []
        self._losses: dict[str, dict[int, float]] = {}
        self._order: list[str] = []

    def __len__(self):
        return len(self.records)

    def register(self, config: Mapping) -> str:
        config = config if isinstance(config, Config) else Config(config)
        cid = config.id
        if cid not in self.configs:
            self.configs[cid] = config
            self._losses[cid] = {}
            self._order.append(cid)
        return cid

    def append(self, record: FoldLossRecord) -> None:
        if record.config_id not in self.configs:
            raise ConfigError(f"unregistered config {record.config_id}")
        folds = self._losses[record.config_id]
        if record.fold in folds:
            raise ConfigError(f"duplicate record for {record.config_id} fold {record.fold}")
        folds[record.fold] = record.loss
        self.records.append(record)

    def has(self, config_id: str, fold: int) -> bool:
        return fold in self._losses.get(config_id, {})

    def fold_losses(self, config_id: str) -> dict[int, float]:
        """Fold -> loss, in evaluation order."""
        return dict(self._losses.get(config_id, {}))

    def folds_of(self, config_id: str) -> list[int]:
        return list(self._losses.get(config_id, {}))

    def config_ids(self) -> list[str]:
        """Registered configs in first-seen order."""
        return list(self._order)

    def evaluated_ids(self) -> list[str]:
        return [c for c in self._order if self._losses[c]]

    def mean_loss(self, config_id: str, over: Iterable[int] | None = None) -> float:
        return mean_cv_loss(self, config_id, over)

    def add_incumbent(self, entry: TrajectoryEntry) -> None:
        self.trajectory.append(entry)

    @property
    def incumbent_id(self) -> str | None:
        return self.trajectory[-1].config_id if self.trajectory else None

    # -- serialization -------------------------------------------------------

    def to_lines(self, include_time: bool = True) -> list[dict]:
        """Replayable event log: configs, records and incumbent changes in order."""
        lines, seen = [], set()
        traj = iter(self.trajectory)
        pending = next(traj, None)
        for i, rec in enumerate(self.records):
            if rec.config_id not in seen:
                seen.add(rec.config_id)
                lines.append({"kind": "config", "id": rec.config_id,
                              "values": self.configs[rec.config_id].to_dict()})
            lines.append({"kind": "record", **rec.to_dict(include_time)})
            while pending is not None and pending.evaluations <= i + 1:
                lines.append({"kind": "incumbent", **pending.to_dict()})
                pending = next(traj, None)
        for cid in self._order:
            if cid not in seen:
                lines.append({"kind": "config", "id": cid, "values": self.configs[cid].to_dict()})
        while pending is not None:
            lines.append({"kind": "incumbent", **pending.to_dict()})
            pending = next(traj, None)
        return lines

    def dumps(self, include_time: bool = True) -> str:
        return "".join(json.dumps(line, sort_keys=True) + "\n"
                       for line in self.to_lines(include_time))

    @classmethod
    def from_lines(cls, lines: Iterable[Mapping]) -> "RunHistory":
        h = cls()
        for line in lines:
            kind = line["kind"]
            if kind == "config":
                cid = h.register(Config(line["values"]))
                if cid != line["id"]:
                    raise ConfigError(f"config id mismatch: {cid} != {line['id']}")
            elif kind == "record":
                h.append(FoldLossRecord(line["config_id"], int(line["fold"]), float(line["loss"]),
                                        bool(line["budget_exhausted"]),
                                        float(line.get("wall_time", 0.0)), int(line["seed"])))
            elif kind == "incumbent":
                h.add_incumbent(TrajectoryEntry(int(line["evaluations"]), line["config_id"],
                                                float(line["mean_loss"]), int(line["n_folds"]),
                                                line.get("replaced_mean")))
            else:
                raise ConfigError(f"unknown history line kind {kind!r}")
        return h

    @classmethod
    def loads(cls, text: str) -> "RunHistory":
        return cls.from_lines(json.loads(s) for s in text.splitlines() if s.strip())

    def same_as(self, other: "RunHistory") -> bool:
        return self.dumps(include_time=False) == other.dumps(include_time=False)


def mean_cv_loss(history: RunHistory, config_id: str, over: Iterable[int] | None = None) -> float:
    """Mean of the recorded fold losses of ``config_id`` over the folds ``over``.

    ``over=None`` means every evaluated fold.  Raises :class:`MissingFold`
    for a requested fold without a record.
    """
    losses = history._losses.get(config_id, {})
    folds = list(losses) if over is None else list(over)
    if not folds:
        raise MissingFold(None)
    for f in folds:
        if f not in losses:
            raise MissingFold(f)
    return math.fsum(losses[f] for f in folds) / len(folds)


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def evaluate_fold(config: Mapping, data: Dataset, plan: FoldPlan, fold: int,
                  budget: int | None = DEFAULT_FOLD_BUDGET, seed: int = 0,
                  timeout: float | None = None) -> FoldLossRecord:
    """Train on every fold but ``fold`` and return the misclassification rate on it.

    Running out of ``budget`` (instance evaluations) or ``timeout`` seconds
    yields loss 1.0 with ``budget_exhausted`` set.
    """
    if not 0 <= fold < plan.k:
        raise ConfigError(f"fold {fold} outside [0, {plan.k})")
    config = config if isinstance(config, Config) else Config(config)
    start = time.perf_counter()
    meter = Budget(budget, timeout)
    try:
        model = train(config, data.subset(plan.train_indices(fold)), meter, fold_seed(seed, fold))
        loss = misclassification_rate(model, data.subset(plan.valid_indices(fold)), meter)
        exhausted = False
    except BudgetExhausted:
        loss, exhausted = 1.0, True
    return FoldLossRecord(config.id, fold, float(loss), exhausted,
                          time.perf_counter() - start, seed)


@dataclass
class CVEvaluator:
    """Fold-loss oracle over one dataset and one shared fold plan.

    Results are cached by (config, fold, seed) so no pair is trained twice.
    """

    data: Dataset
    plan: FoldPlan
    fold_budget: int | None = DEFAULT_FOLD_BUDGET
    seed: int = 0
    timeout: float | None = None
    cache: dict = field(default_factory=dict, repr=False)
    calls: int = 0

    @property
    def k(self) -> int:
        return self.plan.k

    def evaluate(self, config: Config, fold: int) -> FoldLossRecord:
        key = (config.key, fold, self.seed)
        hit = self.cache.get(key)
        if hit is None:
            self.calls += 1
            hit = evaluate_fold(config, self.data, self.plan, fold, self.fold_budget,
                                self.seed, self.timeout)
            self.cache[key] = hit
        return hit
