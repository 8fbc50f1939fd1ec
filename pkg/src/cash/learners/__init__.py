"""From-scratch classifier roster and its hyperparameter space."""

from .classifiers import Budget, Schema
from .featsel import FeatSelConfig, FeatureSelector, select_features
from .roster import (
    BASE_LEARNERS,
    ENSEMBLES,
    META_LEARNERS,
    ROSTER,
    TrainedModel,
    build_learner_space,
    default_config,
    describe,
    learner_of,
    misclassification_rate,
    predict,
    space_of_learners,
    train,
)

__all__ = [
    "BASE_LEARNERS", "ENSEMBLES", "META_LEARNERS", "ROSTER", "Budget", "FeatSelConfig",
    "FeatureSelector", "Schema", "TrainedModel", "build_learner_space", "default_config",
    "describe", "learner_of", "misclassification_rate", "predict", "select_features",
    "space_of_learners", "train",
]
