"""Small bundled datasets used by the examples and the benchmark tests.

``iris.arff``      150 instances, 4 numeric attributes, 3 classes.
``waveform.csv``   1000 instances of Breiman's 21-attribute waveform
                   generator, 3 classes (regenerate with
                   :func:`generate_waveform`).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from ..data import Dataset, load_dataset, make_dataset

BUNDLED = {"iris": "iris.arff", "waveform": "waveform.csv"}


def path(name: str) -> Path:
    return Path(str(resources.files("cash.datasets").joinpath(BUNDLED[name])))


def load(name: str) -> Dataset:
    return load_dataset(path(name))


def generate_waveform(n: int = 1000, seed: int = 0) -> Dataset:
    """Breiman et al.'s waveform-21: each class mixes two of three triangular bases."""
    rng = np.random.default_rng(seed)
    t = np.arange(1, 22)
    h1 = np.maximum(6 - np.abs(t - 7), 0)
    h2 = np.maximum(6 - np.abs(t - 15), 0)
    h3 = np.maximum(6 - np.abs(t - 11), 0)
    pairs = [(h1, h2), (h1, h3), (h2, h3)]
    y = rng.integers(0, 3, size=n)
    u = rng.uniform(size=n)[:, None]
    base_a = np.array([pairs[c][0] for c in y])
    base_b = np.array([pairs[c][1] for c in y])
    X = u * base_a + (1 - u) * base_b + rng.normal(size=(n, 21))
    return make_dataset(np.round(X, 4), y, name="waveform")
