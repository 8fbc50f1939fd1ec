"""Experiment orchestration: seeded runs, bootstrap batches, test evaluation and reports.

Protocol: the test set is split off first and only ever reaches
:func:`final_test_loss`.  The remaining training side is split again into
an inner part, on which optimizers cross-validate, and a validation part
used for the overfitting signal.  Each run's incumbent is retrained on the
whole training side for its test error.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .baselines import ex_def_run, random_grid
from .data import Dataset, load_dataset, split_train_test, stratified_folds
from .errors import ConfigError, EmptyInput
from .evaluator import DEFAULT_FOLD_BUDGET, DEFAULT_K, CVEvaluator
from .learners.roster import META_LEARNERS, ROOT, describe, featsel_config, learner_of, space_of_learners
from .smac import SMAC
from .smbo import RandomStrategy, RunResult, optimize, overfit_signal, validation_loss
from .tpe import TPE

METHODS = ("smac", "tpe", "random", "random_grid", "ex_def")
DEFAULT_WORKERS = 4
DEFAULT_BOOTSTRAP = 100_000


def normalize_method(name: str) -> str:
    m = name.replace("-", "_").lower()
    if m not in METHODS:
        raise ConfigError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return m


@dataclass
class ExperimentConfig:
    data: str
    method: str = "smac"
    format: str | None = None
    label_column: str | int = -1
    k: int = DEFAULT_K
    budget: int = 200
    seeds: int = 25
    batch: int = 4
    test_fraction: float = 0.3
    inner_fraction: float = 0.3
    out: str | None = None
    workers: int | None = None
    bootstrap_samples: int = DEFAULT_BOOTSTRAP
    bootstrap_seed: int = 0
    split_seed: int = 0
    fold_budget: int | None = DEFAULT_FOLD_BUDGET
    time_limit: float | None = None

    def __post_init__(self):
        self.method = normalize_method(self.method)
        if self.seeds < 1:
            raise ConfigError("need at least one seed")
        if not 1 <= self.batch <= self.seeds:
            raise ConfigError(f"batch size {self.batch} must lie in [1, seeds={self.seeds}]")
        for name in ("test_fraction", "inner_fraction"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.budget < self.k:
            raise ConfigError(f"budget {self.budget} is below one cross-validation ({self.k} folds)")
        if self.bootstrap_samples < 1:
            raise ConfigError("bootstrap_samples must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def worker_count(cfg: ExperimentConfig) -> int:
    env = os.environ.get("CASH_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CASH_WORKERS must be an integer, got {env!r}") from None
    return cfg.workers if cfg.workers else DEFAULT_WORKERS


# -- single runs ---------------------------------------------------------------


def make_strategy(method: str):
    return {"smac": SMAC, "tpe": TPE, "random": RandomStrategy}[method]()


def run_method(method: str, evaluator, budget: int, seed: int,
               time_limit: float | None = None) -> RunResult:
    space = space_of_learners()
    if method == "ex_def":
        return ex_def_run(evaluator)
    if method == "random_grid":
        return random_grid(evaluator, budget, seed)
    return optimize(make_strategy(method), space, evaluator, budget, seed, time_limit=time_limit)


def complete_incumbent(run: RunResult, evaluator) -> list[float]:
    """Loss of the run's incumbent on every fold, evaluating missing ones.

    Extra evaluations are for reporting only and are not added to the history.
    """
    losses = run.history.fold_losses(run.incumbent_id)
    return [losses[f] if f in losses else evaluator.evaluate(run.incumbent, f).loss
            for f in range(evaluator.k)]


def final_test_loss(config, train: Dataset, test: Dataset, seed: int = 0,
                    budget: int | None = DEFAULT_FOLD_BUDGET) -> float:
    """The only routine that touches the test set."""
    return validation_loss(config, train, test, seed, budget)


@dataclass
class RunSummary:
    seed: int
    cv_loss: float
    fold_losses: list
    test_loss: float
    incumbent: dict
    description: str
    evaluations: int
    trajectory_cv: list
    trajectory_valid: list
    spearman: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def _run_one(args) -> tuple[dict, dict]:
    method, seed, splits, k, budget, fold_budget, split_seed, time_limit = args
    train, test, inner, valid = splits
    plan = stratified_folds(inner, k, split_seed)
    evaluator = CVEvaluator(inner, plan, fold_budget, seed=0)
    run = run_method(method, evaluator, budget, seed, time_limit)
    run.seed = seed
    folds = complete_incumbent(run, evaluator)
    traj_cv, traj_valid, rho = overfit_signal(run.history, inner, valid, 0, fold_budget)
    test_loss = final_test_loss(run.incumbent, train, test, 0, fold_budget)
    summary = RunSummary(seed, math.fsum(folds) / len(folds), folds, test_loss,
                         run.incumbent.to_dict(), describe(run.incumbent), run.evaluations,
                         traj_cv, traj_valid, rho)
    return run.to_dict(include_times=False, describe=describe), summary.to_dict()


def prepare_splits(cfg: ExperimentConfig):
    data = load_dataset(cfg.data, cfg.format, cfg.label_column)
    train, test = split_train_test(data, cfg.test_fraction, cfg.split_seed)
    inner, valid = split_train_test(train, cfg.inner_fraction, cfg.split_seed + 1)
    return data, (train, test, inner, valid)


# -- bootstrap -----------------------------------------------------------------


def _winner_ranks(cv_losses: Sequence[float], seeds: Sequence[int]) -> np.ndarray:
    """Rank of each run under (CV loss, seed) ordering; lower wins."""
    order = sorted(range(len(cv_losses)), key=lambda i: (cv_losses[i], seeds[i]))
    ranks = np.empty(len(order), dtype=np.int64)
    ranks[order] = np.arange(len(order))
    return ranks


def _batch_winners(ranks: np.ndarray, picks: np.ndarray) -> np.ndarray:
    best = np.argmin(ranks[picks], axis=1)
    return picks[np.arange(len(picks)), best]


def bootstrap_winners(cv_losses: Sequence[float], seeds: Sequence[int], batch: int,
                      n_samples: int, seed: int = 0) -> np.ndarray:
    """Index of the best-CV run in each with-replacement batch of ``batch`` runs.

    When all n**batch ordered batches number at most ``n_samples`` they are
    enumerated, which makes the result exact; otherwise ``n_samples``
    batches are drawn at random.
    """
    n = len(cv_losses)
    if n == 0:
        raise EmptyInput("no runs to bootstrap")
    ranks = _winner_ranks(cv_losses, seeds)
    if n**batch <= n_samples:
        picks = np.array(list(itertools.product(range(n), repeat=batch)), dtype=np.int64)
    else:
        picks = np.random.default_rng(seed).integers(0, n, size=(n_samples, batch))
    return _batch_winners(ranks, picks)


def bootstrap_medians(cv_losses, test_losses, seeds, batch, n_samples, seed=0):
    """Medians of the batch winners' CV and test losses."""
    w = bootstrap_winners(cv_losses, seeds, batch, n_samples, seed)
    return (float(np.median(np.asarray(cv_losses, dtype=float)[w])),
            float(np.median(np.asarray(test_losses, dtype=float)[w])))


# -- census and report -----------------------------------------------------------


def classifier_census(incumbents: Sequence[Mapping]) -> dict:
    """Share of final incumbents per learner, meta-learner base and feature-selection use."""
    if not incumbents:
        raise EmptyInput("no incumbents to count")
    n = len(incumbents)

    def shares(keys):
        counts: dict = {}
        for key in keys:
            counts[key] = counts.get(key, 0) + 1
        return {k: counts[k] / n for k in sorted(counts, key=lambda k: (-counts[k], k))}

    return {
        "learner": shares(learner_of(c) for c in incumbents),
        "meta_base": shares(c["meta_base"] if not c[ROOT] and c["class"] in META_LEARNERS else "-"
                            for c in incumbents),
        "feature_selection": shares(
            "none" if featsel_config(c) is None
            else f"{featsel_config(c).search}/{featsel_config(c).evaluator}" for c in incumbents),
    }


def build_report(cfg: Mapping, summaries: Sequence[Mapping]) -> dict:
    """Everything in the report derives from ``cfg`` and the per-run summaries."""
    summaries = sorted(summaries, key=lambda s: s["seed"])
    cv = [s["cv_loss"] for s in summaries]
    test = [s["test_loss"] for s in summaries]
    seeds = [s["seed"] for s in summaries]
    med_cv, med_test = bootstrap_medians(cv, test, seeds, cfg["batch"],
                                         cfg["bootstrap_samples"], cfg["bootstrap_seed"])
    return {
        "method": cfg["method"],
        "dataset": cfg["data"],
        "n_runs": len(summaries),
        "batch": cfg["batch"],
        "bootstrap_samples": cfg["bootstrap_samples"],
        "median_cv_error": med_cv,
        "median_test_error": med_test,
        "spearman": [s["spearman"] for s in summaries],
        "runs": [{"seed": s["seed"], "cv_error": s["cv_loss"], "test_error": s["test_loss"],
                  "incumbent": s["description"], "evaluations": s["evaluations"]}
                 for s in summaries],
        "census": classifier_census([s["incumbent"] for s in summaries]),
    }


def _pct(v: float) -> str:
    return f"{100 * v:.2f}"


def report_markdown(report: Mapping) -> str:
    rho = [r for r in report["spearman"] if r is not None]
    sc = f"{statistics.median(rho):.2f}" if rho else "n/a"
    lines = [
        f"# {report['method']} on {Path(report['dataset']).name}",
        "",
        f"{report['n_runs']} runs; medians over {report['bootstrap_samples']} bootstrap "
        f"batches of {report['batch']} runs.",
        "",
        "| Method | CV error (%) | Test error (%) | Spearman (median) |",
        "|---|---|---|---|",
        f"| {report['method']} | {_pct(report['median_cv_error'])} | "
        f"{_pct(report['median_test_error'])} | {sc} |",
        "",
        "## Runs",
        "",
        "| Seed | CV error (%) | Test error (%) | Evaluations | Incumbent |",
        "|---|---|---|---|---|",
    ]
    for r in report["runs"]:
        lines.append(f"| {r['seed']} | {_pct(r['cv_error'])} | {_pct(r['test_error'])} | "
                     f"{r['evaluations']} | `{r['incumbent']}` |")
    lines += ["", "## Chosen classifiers", "", "| Learner | Share |", "|---|---|"]
    for name, share in report["census"]["learner"].items():
        lines.append(f"| {name} | {100 * share:.0f}% |")
    return "\n".join(lines) + "\n"


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def write_outputs(out: Path, cfg: ExperimentConfig, runs: Sequence[dict],
                  summaries: Sequence[dict], report: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    runs_dir = out / "runs"
    runs_dir.mkdir(exist_ok=True)
    _dump(out / "experiment.json", cfg.to_dict())
    for run, summary in zip(runs, summaries):
        _dump(runs_dir / f"run_{summary['seed']:03d}.json", run)
        _dump(runs_dir / f"summary_{summary['seed']:03d}.json", summary)
    _dump(out / "report.json", report)
    (out / "report.md").write_text(report_markdown(report))


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute the protocol, write artifacts to ``cfg.out`` (if set), return the report."""
    _, splits = prepare_splits(cfg)
    if splits[2].n_instances < cfg.k:
        raise ConfigError(f"inner training set has {splits[2].n_instances} instances, fewer than k={cfg.k}")
    seeds = [0] if cfg.method == "ex_def" else list(range(cfg.seeds))
    tasks = [(cfg.method, s, splits, cfg.k, cfg.budget, cfg.fold_budget, cfg.split_seed,
              cfg.time_limit) for s in seeds]
    workers = min(worker_count(cfg), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    runs = [r for r, _ in results]
    summaries = [s for _, s in results]
    if cfg.method == "ex_def" and cfg.seeds > 1:
        # deterministic: every seed would reproduce the same run
        runs = [dict(runs[0], seed=s) for s in range(cfg.seeds)]
        summaries = [dict(summaries[0], seed=s) for s in range(cfg.seeds)]
    report = build_report(cfg.to_dict(), summaries)
    if cfg.out:
        write_outputs(Path(cfg.out), cfg, runs, summaries, report)
    return report


def regenerate_report(directory) -> dict:
    """Rebuild report.json / report.md from the serialized runs in ``directory``."""
    directory = Path(directory)
    cfg_path = directory / "experiment.json"
    if not cfg_path.exists():
        raise ConfigError(f"{directory} holds no experiment.json")
    cfg = json.loads(cfg_path.read_text())
    summaries = [json.loads(p.read_text()) for p in sorted((directory / "runs").glob("summary_*.json"))]
    if not summaries:
        raise ConfigError(f"{directory} holds no run summaries")
    report = build_report(cfg, summaries)
    _dump(directory / "report.json", report)
    (directory / "report.md").write_text(report_markdown(report))
    return report
