"""SMAC-style optimization: forest surrogate, expected improvement and fold racing."""

from .acquisition import expected_improvement
from .forest import Posterior, RegressionForest, fit_forest, predict, tree_moments
from .optimizer import SMAC, IncumbentState, intensify, local_search

__all__ = ["SMAC", "IncumbentState", "Posterior", "RegressionForest", "expected_improvement",
           "fit_forest", "intensify", "local_search", "predict", "tree_moments"]
