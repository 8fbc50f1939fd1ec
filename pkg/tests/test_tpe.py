import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cash.benchmarks import SyntheticEvaluator, synthetic_space
from cash.errors import NonpositiveDensity, TooFewObservations
from cash.smbo import optimize
from cash.space import Condition, Config, ParamSpec, validate_space
from cash.tpe import (
    TPE,
    ContinuousParzen,
    HistorySplit,
    bandwidths,
    build_parzen,
    continuous_parzen,
    density,
    discrete_parzen,
    ei_score,
    propose_tpe,
    sample_tree,
    split_observations,
)


def _obs(losses):
    return [(Config({"i": i}), loss) for i, loss in enumerate(losses)]


def _space():
    return validate_space([
        ParamSpec.categorical("a", ("x", "y", "z")),
        ParamSpec.real("b", 0.0, 1.0, default=0.5, conditions=[Condition("a", ("x",))]),
        ParamSpec.real("c", 1e-3, 10.0, default=1.0, log=True),
        ParamSpec.integer("n", 1, 9, default=3),
    ], root="a")


class TestSplit:
    def test_tenth_steps(self):
        split = split_observations(_obs([round(0.1 * i, 1) for i in range(1, 11)]), 0.15)
        assert len(split.good) == math.ceil(0.15 * 10) == 2
        assert split.threshold == 0.3

    def test_all_equal_has_no_good(self):
        split = split_observations(_obs([0.4] * 6))
        assert split.good == [] and len(split.bad) == 6

    def test_two_points(self):
        split = split_observations(_obs([0.2, 0.8]), 0.5)
        assert [loss for _, loss in split.good] == [0.2]

    def test_too_few(self):
        with pytest.raises(TooFewObservations):
            split_observations(_obs([0.3]))

    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=2, max_size=40), st.floats(0.05, 0.95))
    def test_partition(self, losses, gamma):
        split = split_observations(_obs(losses), gamma)
        assert split.n == len(losses)
        assert all(loss < split.threshold for _, loss in split.good)
        assert all(loss >= split.threshold for _, loss in split.bad)
        assert split.threshold in losses


class TestEstimators:
    def test_bandwidth_rule(self):
        sig = bandwidths(np.array([0.2, 0.5, 0.9]), 0.0, 1.0)
        assert sig[1] == pytest.approx(0.4, abs=1e-15)
        # the domain ends stand in for the missing neighbours
        assert sig[0] == pytest.approx(0.3) and sig[2] == pytest.approx(0.4)

    def test_discrete_smoothing(self):
        spec = ParamSpec.categorical("a", ("x", "y", "z"))
        node = discrete_parzen(spec, ["x", "x", "y"])
        assert np.allclose(node.probs, np.array([3, 2, 1]) / 6, atol=1e-15)

    def test_inactive_parameter_not_counted(self):
        space = _space()
        tree = build_parzen([Config({"a": "x", "b": 0.3, "c": 1.0, "n": 2}),
                             Config({"a": "y", "c": 2.0, "n": 5})], space)
        assert tree["b"].n_obs == 1
        assert tree["a"].n_obs == 2

    def test_empty_prior_is_uniform(self):
        spec = ParamSpec.real("b", 0.0, 1.0, default=0.5)
        node = continuous_parzen(spec, [])
        assert node.value_density(0.37) == pytest.approx(1.0, abs=1e-15)

    def test_integer_bins_sum_to_one(self):
        spec = ParamSpec.integer("n", 1, 9, default=3)
        node = continuous_parzen(spec, [2, 2, 7])
        assert sum(node.value_density(v) for v in range(1, 10)) == pytest.approx(1.0, abs=1e-12)

    def test_log_node_lives_in_log_space(self):
        spec = ParamSpec.real("c", 1e-3, 10.0, default=1.0, log=True)
        node = continuous_parzen(spec, [0.01, 0.1])
        assert node.lo == pytest.approx(math.log(1e-3)) and node.hi == pytest.approx(math.log(10.0))
        assert node.value_density(0.01) == pytest.approx(float(node.pdf([math.log(0.01)])[0]))

    @pytest.mark.parametrize("m", [0, 1, 2, 5, 17, 50])
    def test_normalization(self, m):
        rng = np.random.default_rng(m)
        spec = ParamSpec.real("b", -2.0, 3.0, default=0.0)
        node = continuous_parzen(spec, list(rng.uniform(-2, 3, size=m)))
        total, _ = integrate.quad(lambda t: node.pdf([t])[0], node.lo, node.hi,
                                  points=list(node.mus[:40]), limit=500, epsabs=1e-10)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_sample_stays_in_domain(self):
        node = ContinuousParzen(0.0, 1.0, np.array([0.0, 0.99]), np.array([0.5, 0.5]))
        rng = np.random.default_rng(0)
        draws = [node.sample(rng) for _ in range(500)]
        assert min(draws) >= 0.0 and max(draws) <= 1.0

    def test_more_data_is_closer_to_truth(self):
        rng = np.random.default_rng(11)
        spec = ParamSpec.real("b", 0.0, 1.0, default=0.5)

        def draw(n):
            return np.clip(np.where(rng.uniform(size=n) < 0.5, rng.normal(0.25, 0.05, n),
                                    rng.normal(0.7, 0.1, n)), 0.0, 1.0)

        def truth(t):
            from scipy.stats import norm
            return 0.5 * norm.pdf(t, 0.25, 0.05) + 0.5 * norm.pdf(t, 0.7, 0.1)

        grid = np.linspace(0, 1, 2001)
        small = continuous_parzen(spec, list(draw(50)))
        large = continuous_parzen(spec, list(draw(500)))
        l1_small = integrate.trapezoid(np.abs(small.pdf(grid) - truth(grid)), grid)
        l1_large = integrate.trapezoid(np.abs(large.pdf(grid) - truth(grid)), grid)
        assert l1_large < l1_small


class TestDensity:
    def test_discrete_only(self):
        space = validate_space([ParamSpec.categorical("a", ("p", "q"))], root="a")
        tree = build_parzen([], space)
        assert density(tree, space, Config({"a": "q"})) == 0.5

    def test_product_of_active_nodes(self):
        space = _space()
        configs = [Config({"a": "x", "b": 0.3, "c": 1.0, "n": 2}),
                   Config({"a": "y", "c": 0.02, "n": 5})]
        tree = build_parzen(configs, space)
        q = Config({"a": "x", "b": 0.6, "c": 0.5, "n": 4})
        want = (discrete_parzen(space["a"], ["x", "y"]).value_density("x")
                * continuous_parzen(space["b"], [0.3]).value_density(0.6)
                * continuous_parzen(space["c"], [1.0, 0.02]).value_density(0.5)
                * continuous_parzen(space["n"], [2, 5]).value_density(4))
        assert density(tree, space, q) == pytest.approx(want, rel=1e-12)

    def test_inactive_never_visited(self):
        space = _space()
        tree = build_parzen([], space)
        trace = []
        density(tree, space, Config({"a": "z", "c": 0.5, "n": 4}), trace)
        assert "b" not in trace


class TestProposal:
    def test_identical_densities_take_first(self):
        space = _space()
        cfgs = [Config({"a": "x", "b": 0.3, "c": 1.0, "n": 2})] * 2
        split = HistorySplit([(cfgs[0], 0.1)], [(cfgs[1], 0.2)], 0.2)
        rng = np.random.default_rng(5)
        got = propose_tpe(split, space, n_candidates=10, rng=rng)
        # replay the same candidate stream: all ratios are 1, so the first wins
        ref = np.random.default_rng(5)
        first = sample_tree(build_parzen([cfgs[0]], space), space, ref)
        assert got == first

    def test_single_candidate(self):
        space = _space()
        c = Config({"a": "y", "c": 1.0, "n": 2})
        split = HistorySplit([(c, 0.1)], [(c, 0.4)], 0.4)
        got = propose_tpe(split, space, n_candidates=1, rng=np.random.default_rng(2))
        assert got == sample_tree(build_parzen([c], space), space, np.random.default_rng(2))

    def test_prefers_good_region(self):
        space = validate_space([ParamSpec.categorical("alg", ("only",)),
                                ParamSpec.real("x", 0.0, 1.0, default=0.5)], root="alg")
        good = [(Config({"alg": "only", "x": v}), 0.1) for v in (0.19, 0.2, 0.21)]
        bad = [(Config({"alg": "only", "x": v}), 0.9) for v in (0.79, 0.8, 0.81)]
        split = HistorySplit(good, bad, 0.5)
        hits = 0
        for seed in range(100):
            x = propose_tpe(split, space, n_candidates=100, rng=np.random.default_rng(seed))["x"]
            hits += abs(x - 0.2) < abs(x - 0.8)
        assert hits >= 95

    def test_run_is_deterministic(self):
        a = optimize(TPE(), synthetic_space(), SyntheticEvaluator(k=3), 60, seed=2)
        b = optimize(TPE(), synthetic_space(), SyntheticEvaluator(k=3), 60, seed=2)
        assert a.to_json() == b.to_json()
        assert all(len(a.history.folds_of(c)) == 3 for c in a.history.evaluated_ids())


class TestEiScore:
    def test_equal_densities(self):
        assert abs(ei_score(0.15, 0.7, 0.7) - 1.0) <= 1e-12

    def test_zero_g(self):
        assert abs(ei_score(0.15, 1.0, 0.0) - 1 / 0.15) <= 1e-12

    def test_ratio_two(self):
        assert abs(ei_score(0.15, 0.5, 1.0) - 1 / 1.85) <= 1e-12

    def test_nonpositive_l(self):
        with pytest.raises(NonpositiveDensity):
            ei_score(0.15, 0.0, 1.0)

    def test_argmax_matches_ratio_argmin(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            gamma = rng.uniform(0.01, 0.99)
            ls, gs = rng.uniform(0.01, 5, 8), rng.uniform(0, 5, 8)
            scores = [ei_score(gamma, a, b) for a, b in zip(ls, gs)]
            assert int(np.argmax(scores)) == int(np.argmin(gs / ls))
