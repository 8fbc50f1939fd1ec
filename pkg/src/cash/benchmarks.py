"""A synthetic CASH problem with an analytic optimum.

Two "algorithms" sit under the root selector.  ``const`` always scores 0.9.
``quad`` has a categorical ``variant`` (offsets 0, 0.2, 0.4) and two
conditional reals ``x`` and ``y`` on [0, 1]:

    loss = min(0.95, 0.05 + offset + (x - 0.7)^2 + (y - 0.3)^2)

so the optimum 0.05 sits at variant ``a``, x = 0.7, y = 0.3.  Fold losses
carry config-specific noise that sums to zero over the k folds, so the full
CV mean equals the true loss exactly while partial means do not.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .evaluator import FoldLossRecord
from .space import Condition, Config, ParamSpace, ParamSpec, validate_space

OPTIMUM = 0.05
CONST_LOSS = 0.9
CAP = 0.95
OFFSETS = {"a": 0.0, "b": 0.2, "c": 0.4}
TARGET = (0.7, 0.3)


def synthetic_space() -> ParamSpace:
    quad = [Condition("algorithm", ("quad",))]
    return validate_space([
        ParamSpec.categorical("algorithm", ("const", "quad")),
        ParamSpec.categorical("variant", tuple(OFFSETS), conditions=quad),
        ParamSpec.real("x", 0.0, 1.0, default=0.5, conditions=quad),
        ParamSpec.real("y", 0.0, 1.0, default=0.5, conditions=quad),
    ], "algorithm")


def true_loss(config: Mapping) -> float:
    if config["algorithm"] == "const":
        return CONST_LOSS
    d = (config["x"] - TARGET[0]) ** 2 + (config["y"] - TARGET[1]) ** 2
    return min(CAP, OPTIMUM + OFFSETS[config["variant"]] + d)


def _fold_noise(config: Config, k: int, seed: int) -> np.ndarray:
    digest = hashlib.sha1(f"{seed}:{config.key}".encode()).digest()
    z = np.random.default_rng(int.from_bytes(digest[:8], "little")).uniform(-1.0, 1.0, k)
    return z - z.mean()


@dataclass
class SyntheticEvaluator:
    """Fold-loss oracle for :func:`synthetic_space`, pluggable into the SMBO loop.

    Fold f of config c scores ``L + noise * min(L, 1 - L) * z_f`` with
    ``sum_f z_f = 0`` and ``|z_f| <= 2``; ``noise <= 0.5`` keeps it in [0, 1].
    """

    k: int = 10
    seed: int = 0
    noise: float = 0.4

    def fold_losses(self, config: Config) -> np.ndarray:
        loss = true_loss(config)
        return loss + self.noise * min(loss, 1.0 - loss) * _fold_noise(config, self.k, self.seed)

    def evaluate(self, config: Config, fold: int) -> FoldLossRecord:
        config = config if isinstance(config, Config) else Config(config)
        value = float(np.clip(self.fold_losses(config)[fold], 0.0, 1.0))
        return FoldLossRecord(config.id, fold, value, False, 0.0, self.seed)


def regret(config: Mapping) -> float:
    return true_loss(config) - OPTIMUM if config is not None else math.inf
