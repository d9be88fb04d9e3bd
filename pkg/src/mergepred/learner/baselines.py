"""Reference classifiers: prior-rate random guessing and the FS1-only tree."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError
from ..features import FS1_INDEX
from .tree import HyperParams, TreeModel, fit_tree_arrays


@dataclass(frozen=True)
class Baseline1Model:
    """Predicts conflict with probability equal to the training conflict rate."""

    p: float
    n_features: int
    operator: str = ""
    schema_version: str = ""

    def predict(self, X, rng: np.random.Generator) -> np.ndarray:
        n = len(np.atleast_2d(X))
        return (rng.random(n) < self.p).astype(np.int64)


def fit_baseline1_arrays(X, y) -> Baseline1Model:
    y = np.asarray(y)
    if len(y) == 0:
        raise TrainingError("cannot fit baseline #1 on an empty dataset")
    X = np.asarray(X)
    return Baseline1Model(float(y.mean()), X.shape[1] if X.ndim == 2 else 0)


def predict_baseline1(p: float, rng: np.random.Generator, n: int | None = None):
    """One draw (``n is None``) or ``n`` independent draws at conflict rate ``p``."""
    if n is None:
        return int(rng.random() < p)
    return (rng.random(n) < p).astype(np.int64)


def fit_baseline2_arrays(X, y, hp: HyperParams) -> TreeModel:
    return fit_tree_arrays(X, y, hp, feature_mask=[FS1_INDEX])
