import math

import numpy as np
import pytest

from cash.data import FoldPlan, make_dataset, stratified_folds
from cash.errors import ConfigError, MissingFold
from cash.evaluator import (
    DEFAULT_K,
    CVEvaluator,
    FoldLossRecord,
    RunHistory,
    TrajectoryEntry,
    evaluate_fold,
    mean_cv_loss,
)
from cash.learners import default_config
from cash.space import Config


def _history(losses_by_fold, cid_values={"a": 1}):
    h = RunHistory()
    cid = h.register(Config(cid_values))
    for f, loss in losses_by_fold.items():
        h.append(FoldLossRecord(cid, f, loss))
    return h, cid


class TestFoldLossRecord:
    def test_exhausted_must_be_total_loss(self):
        with pytest.raises(ValueError):
            FoldLossRecord("x", 0, 0.3, budget_exhausted=True)

    def test_loss_range(self):
        with pytest.raises(ValueError):
            FoldLossRecord("x", 0, 1.2)


class TestEvaluateFold:
    def _majority_fixture(self):
        # fold 0 holds 3 of class 0 and 2 of class 1; training side keeps the same 3:2 ratio
        y = [0, 0, 0, 1, 1] * 2
        ds = make_dataset(np.arange(10.0)[:, None], y)
        plan = FoldPlan(2, np.array([0] * 5 + [1] * 5))
        return ds, plan

    def test_zero_r_loss_is_minority_share(self):
        ds, plan = self._majority_fixture()
        rec = evaluate_fold(default_config("zero_r"), ds, plan, 0, seed=0)
        assert rec.loss == pytest.approx(0.4, abs=1e-12)
        assert not rec.budget_exhausted

    def test_zero_budget_is_total_error(self):
        ds, plan = self._majority_fixture()
        for learner in ("zero_r", "cart_tree", "bagging"):
            rec = evaluate_fold(default_config(learner), ds, plan, 1, budget=0)
            assert rec.loss == 1.0 and rec.budget_exhausted

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        ds = make_dataset(rng.normal(size=(60, 3)), rng.integers(0, 2, 60))
        plan = stratified_folds(ds, 3, seed=0)
        cfg = default_config("random_forest")
        a = evaluate_fold(cfg, ds, plan, 2, seed=5)
        b = evaluate_fold(cfg, ds, plan, 2, seed=5)
        assert (a.config_id, a.fold, a.loss, a.budget_exhausted) == (b.config_id, b.fold, b.loss, b.budget_exhausted)

    def test_fold_out_of_range(self):
        ds, plan = self._majority_fixture()
        with pytest.raises(ConfigError):
            evaluate_fold(default_config("zero_r"), ds, plan, 2)


class TestMeanCvLoss:
    def test_two_folds(self):
        h, cid = _history({0: 0.1, 1: 0.3})
        assert mean_cv_loss(h, cid, [0, 1]) == pytest.approx(0.2, abs=1e-15)

    def test_single_fold_identity(self):
        h, cid = _history({4: 0.25})
        assert mean_cv_loss(h, cid, [4]) == 0.25

    def test_missing_fold(self):
        h, cid = _history({0: 0.1})
        with pytest.raises(MissingFold) as err:
            mean_cv_loss(h, cid, [0, 3])
        assert err.value.fold == 3

    def test_matches_independent_summation(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            losses = rng.uniform(size=10)
            h, cid = _history(dict(enumerate(losses)))
            # independent oracle: pairwise summation over the raw record list
            oracle = math.fsum(r.loss for r in h.records) / len(h.records)
            assert abs(mean_cv_loss(h, cid, range(10)) - oracle) <= 1e-15

    def test_subset_mean_in_unit_interval(self):
        rng = np.random.default_rng(2)
        h, cid = _history(dict(enumerate(rng.uniform(size=10))))
        for _ in range(30):
            folds = rng.choice(10, size=int(rng.integers(1, 11)), replace=False)
            assert 0.0 <= mean_cv_loss(h, cid, folds) <= 1.0


class TestRunHistory:
    def test_duplicate_record_rejected(self):
        h, cid = _history({0: 0.1})
        with pytest.raises(ConfigError):
            h.append(FoldLossRecord(cid, 0, 0.2))

    def test_unregistered_config_rejected(self):
        with pytest.raises(ConfigError):
            RunHistory().append(FoldLossRecord("nope", 0, 0.2))

    def test_round_trip(self):
        h = RunHistory()
        ids = [h.register(Config({"p": i, "flag": bool(i % 2)})) for i in range(4)]
        rng = np.random.default_rng(3)
        for i, cid in enumerate(ids):
            for f in range(i + 1):
                h.append(FoldLossRecord(cid, f, float(rng.uniform()), False, 0.01 * f, 7))
            if i in (0, 2):
                h.add_incumbent(TrajectoryEntry(len(h), cid, h.mean_loss(cid), i + 1,
                                                None if i == 0 else 0.9))
        back = RunHistory.loads(h.dumps())
        assert back.dumps() == h.dumps()
        assert [r.wall_time for r in back.records] == [r.wall_time for r in h.records]
        assert back.trajectory == h.trajectory
        assert back.configs == h.configs

    def test_lines_carry_kinds(self):
        h, cid = _history({0: 0.5})
        kinds = [line["kind"] for line in h.to_lines()]
        assert kinds == ["config", "record"]


class TestCVEvaluator:
    def test_cache_avoids_retraining(self):
        rng = np.random.default_rng(4)
        ds = make_dataset(rng.normal(size=(40, 2)), rng.integers(0, 2, 40))
        ev = CVEvaluator(ds, stratified_folds(ds, 4, seed=0))
        cfg = default_config("knn")
        first = ev.evaluate(cfg, 1)
        again = ev.evaluate(Config(cfg.to_dict()), 1)
        assert again is first and ev.calls == 1
        ev.evaluate(cfg, 2)
        assert ev.calls == 2

    def test_default_k(self):
        assert DEFAULT_K == 10
