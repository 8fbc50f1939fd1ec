"""The learner roster, its conditional hyperparameter space, and train/predict."""

from __future__ import annotations

import functools
import hashlib
import pickle
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

import numpy as np

from ..data import Dataset
from ..errors import ArityMismatch, InvalidConfig
from ..space import Condition, Config, ParamSpace, ParamSpec, load_space, validate_space
from .classifiers import (
    KNN,
    Budget,
    CartTree,
    Classifier,
    DecisionStump,
    LogisticSGD,
    NaiveBayes,
    OneR,
    RandomForest,
    Schema,
    ZeroR,
)
from .featsel import GREEDY_FORWARD, INFO_GAIN, PEARSON, RANKER, FeatSelConfig, FeatureSelector, select_features
from .meta import AdaBoostM1, Bagging, Voting

BASE_LEARNERS = ("zero_r", "one_r", "decision_stump", "knn", "naive_bayes",
                 "logistic_sgd", "cart_tree", "random_forest")
META_LEARNERS = ("adaboost_m1", "bagging")
ENSEMBLES = ("voting",)
ROSTER = BASE_LEARNERS + META_LEARNERS + ENSEMBLES
MAX_BASES = 5
DEFAULT_META_BASE = "cart_tree"

ROOT = "is_base"
FEAT_SEL = "feat_sel"
BASE_SLOT = "base"
CLASS = "class"
META_BASE = "meta_base"
NUM_CLASSES = "num_classes"
BASE_SLOTS = (BASE_SLOT, META_BASE) + tuple(f"base_{i}" for i in range(1, MAX_BASES + 1))
FEAT_SEARCH = "feat_search"
FEAT_EVAL = "feat_eval"

_CLASSES = {
    "zero_r": ZeroR,
    "one_r": OneR,
    "decision_stump": DecisionStump,
    "knn": KNN,
    "naive_bayes": NaiveBayes,
    "logistic_sgd": LogisticSGD,
    "cart_tree": CartTree,
    "random_forest": RandomForest,
}


def _learner_params(learner: str) -> list[ParamSpec]:
    """Hyperparameters of one base learner, unprefixed and unconditioned."""
    P = ParamSpec
    return {
        "zero_r": [],
        "one_r": [P.integer("min_bucket", 1, 32, default=6)],
        "decision_stump": [],
        "knn": [P.integer("k", 1, 51, default=1, log=True),
                P.categorical("weighting", ("uniform", "inverse_distance"))],
        "naive_bayes": [P.categorical("numeric_model", ("gaussian", "kernel"))],
        "logistic_sgd": [P.real("learning_rate", 1e-4, 1.0, default=0.1, log=True),
                         P.real("l2", 1e-6, 1e-1, default=1e-4, log=True),
                         P.integer("epochs", 1, 50, default=20)],
        "cart_tree": [P.categorical("criterion", ("gini", "entropy")),
                      P.integer("max_depth", 1, 20, default=10),
                      P.integer("min_leaf", 1, 20, default=2)],
        "random_forest": [P.integer("n_trees", 2, 128, default=10, log=True),
                          P.real("feature_fraction", 0.1, 1.0, default=0.5),
                          P.integer("max_depth", 1, 20, default=20)],
    }[learner]


def _prefixed(spec: ParamSpec, prefix: str, cond: Condition) -> ParamSpec:
    return ParamSpec(f"{prefix}.{spec.name}", spec.kind, spec.levels, spec.lo, spec.hi,
                     spec.log, spec.default, (cond,))


def build_learner_space() -> ParamSpace:
    """Assemble the conditional space from the roster tables."""
    P = ParamSpec
    specs = [
        P.categorical(ROOT, (True, False), default=True),
        P.categorical(FEAT_SEL, (False, True), default=False),
        P.categorical(BASE_SLOT, BASE_LEARNERS, default=DEFAULT_META_BASE,
                      conditions=[Condition(ROOT, (True,))]),
        P.categorical(CLASS, META_LEARNERS + ENSEMBLES, default="adaboost_m1",
                      conditions=[Condition(ROOT, (False,))]),
        P.categorical(META_BASE, BASE_LEARNERS, default=DEFAULT_META_BASE,
                      conditions=[Condition(CLASS, META_LEARNERS)]),
        P.integer("adaboost_m1.iterations", 2, 64, default=10, log=True,
                  conditions=[Condition(CLASS, ("adaboost_m1",))]),
        P.integer("bagging.iterations", 2, 64, default=10, log=True,
                  conditions=[Condition(CLASS, ("bagging",))]),
        P.real("bagging.bag_fraction", 0.1, 1.0, default=1.0,
               conditions=[Condition(CLASS, ("bagging",))]),
        P.categorical(NUM_CLASSES, tuple(range(1, MAX_BASES + 1)), default=3,
                      conditions=[Condition(CLASS, ENSEMBLES)]),
    ]
    for i in range(1, MAX_BASES + 1):
        cond = (Condition(CLASS, ENSEMBLES) if i == 1
                else Condition(NUM_CLASSES, tuple(range(i, MAX_BASES + 1))))
        specs.append(P.categorical(f"base_{i}", BASE_LEARNERS, default=DEFAULT_META_BASE,
                                   conditions=[cond]))
    for slot in BASE_SLOTS:
        for learner in BASE_LEARNERS:
            for hp in _learner_params(learner):
                specs.append(_prefixed(hp, f"{slot}.{learner}", Condition(slot, (learner,))))
    specs += [
        P.categorical(FEAT_SEARCH, (RANKER, GREEDY_FORWARD),
                      conditions=[Condition(FEAT_SEL, (True,))]),
        P.categorical(FEAT_EVAL, (INFO_GAIN, PEARSON),
                      conditions=[Condition(FEAT_SEL, (True,))]),
        P.real(f"{FEAT_SEARCH}.{RANKER}.keep_fraction", 0.1, 1.0, default=0.5,
               conditions=[Condition(FEAT_SEARCH, (RANKER,))]),
        P.real(f"{FEAT_SEARCH}.{GREEDY_FORWARD}.max_fraction", 0.1, 1.0, default=1.0,
               conditions=[Condition(FEAT_SEARCH, (GREEDY_FORWARD,))]),
    ]
    census = {
        "parameters": len(specs),
        "conditional": sum(1 for s in specs if s.conditions),
        "base_learners": len(BASE_LEARNERS),
        "meta_learners": len(META_LEARNERS),
        "ensembles": len(ENSEMBLES),
        "feature_search_methods": 2,
        "feature_evaluators": 2,
    }
    return validate_space(specs, ROOT, census)


@functools.lru_cache(maxsize=None)
def space_of_learners() -> ParamSpace:
    """The shipped learner space file, parsed."""
    ref = resources.files("cash.learners").joinpath("space.json")
    with resources.as_file(ref) as path:
        return load_space(path)


# -- model construction --------------------------------------------------------


def _slot_learner(config: Mapping, slot: str) -> Classifier:
    learner = config[slot]
    prefix = f"{slot}.{learner}."
    kwargs = {k[len(prefix):]: v for k, v in config.items() if k.startswith(prefix)}
    return _CLASSES[learner](**kwargs)


def _slot_factory(config: Mapping, slot: str):
    return lambda: _slot_learner(config, slot)


def build_classifier(config: Mapping) -> Classifier:
    if config[ROOT]:
        return _slot_learner(config, BASE_SLOT)
    cls = config[CLASS]
    if cls == "adaboost_m1":
        return AdaBoostM1(_slot_factory(config, META_BASE), config["adaboost_m1.iterations"])
    if cls == "bagging":
        return Bagging(_slot_factory(config, META_BASE), config["bagging.iterations"],
                       config["bagging.bag_fraction"])
    n = config[NUM_CLASSES]
    return Voting([_slot_learner(config, f"base_{i}") for i in range(1, n + 1)])


def featsel_config(config: Mapping) -> FeatSelConfig | None:
    if not config.get(FEAT_SEL, False):
        return None
    search = config[FEAT_SEARCH]
    return FeatSelConfig(
        search=search,
        evaluator=config[FEAT_EVAL],
        keep_fraction=config.get(f"{FEAT_SEARCH}.{RANKER}.keep_fraction", 0.5),
        max_fraction=config.get(f"{FEAT_SEARCH}.{GREEDY_FORWARD}.max_fraction", 1.0),
    )


def learner_of(config: Mapping) -> str:
    """Top-level learner id (base learner, meta method or ensemble)."""
    return config[BASE_SLOT] if config[ROOT] else config[CLASS]


def describe(config: Mapping) -> str:
    """Short human-readable summary, e.g. ``bagging(knn)+fs[ranker/info_gain]``."""
    if config[ROOT]:
        s = config[BASE_SLOT]
    elif config[CLASS] in META_LEARNERS:
        s = f"{config[CLASS]}({config[META_BASE]})"
    else:
        s = "voting(" + ",".join(config[f"base_{i}"] for i in range(1, config[NUM_CLASSES] + 1)) + ")"
    fs = featsel_config(config)
    if fs is not None:
        s += f"+fs[{fs.search}/{fs.evaluator}]"
    return s


def default_config(learner: str) -> Config:
    """Default-hyperparameter configuration of one roster entry, no feature selection."""
    space = space_of_learners()
    if learner in BASE_LEARNERS:
        return space.default_config(**{ROOT: True, BASE_SLOT: learner})
    if learner in META_LEARNERS:
        return space.default_config(**{ROOT: False, CLASS: learner, META_BASE: DEFAULT_META_BASE})
    if learner in ENSEMBLES:
        return space.default_config(**{ROOT: False, CLASS: learner})
    raise InvalidConfig(f"unknown learner {learner!r}")


@dataclass
class TrainedModel:
    config: Config
    classifier: Classifier
    selector: FeatureSelector | None
    n_classes: int
    arity: int

    @property
    def learner(self) -> str:
        return learner_of(self.config)

    def state_hash(self) -> str:
        state = (self.config.key, self.selector, pickle.dumps(
            {k: v for k, v in vars(self.classifier).items() if not callable(v)}, protocol=4))
        return hashlib.sha1(pickle.dumps(state, protocol=4)).hexdigest()


def train(config: Mapping, data: Dataset, budget: Budget | int | None = None,
          seed: int = 0) -> TrainedModel:
    """Fit the learner described by ``config`` on ``data``.

    Raises :class:`~cash.errors.BudgetExhausted` when ``budget`` runs out.
    Training data with a single class yields a majority-class model.
    """
    config = config if isinstance(config, Config) else Config(config)
    if not isinstance(budget, Budget):
        budget = Budget(budget)
    arity = data.n_attributes
    selector = None
    fs = featsel_config(config)
    if fs is not None and data.n_attributes > 0:
        selector = select_features(fs, data, seed, budget)
        data = data.with_columns(selector.columns)
    schema = Schema.of(data)
    rng = np.random.default_rng(seed)
    X, y = data.features, data.labels
    if len(np.unique(y)) < 2:
        clf = ZeroR().fit(X, y, schema, budget=budget)
    else:
        clf = build_classifier(config).fit(X, y, schema, budget=budget, rng=rng)
    return TrainedModel(config, clf, selector, data.n_classes, arity)


def predict(model: TrainedModel, instances, budget: Budget | int | None = None) -> np.ndarray:
    X = instances.features if isinstance(instances, Dataset) else np.asarray(instances, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.arity:
        raise ArityMismatch(f"model expects {model.arity} attributes, got {X.shape[1]}")
    if budget is not None and not isinstance(budget, Budget):
        budget = Budget(budget)
    if model.selector is not None:
        X = model.selector.transform(X)
    return model.classifier.predict(X, budget)


def misclassification_rate(model: TrainedModel, data: Dataset, budget=None) -> float:
    if data.n_instances == 0:
        return 0.0
    pred = predict(model, data, budget)
    return float(np.mean(pred != data.labels))
