"""Bagged random forest of CART trees."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelStateError, TrainingError
from .tree import HyperParams, TreeModel, _as_xy, auto_subset_size, fit_tree_arrays


def tree_seed(master_seed: int, tree_index: int) -> np.random.SeedSequence:
    """Per-tree entropy; depends only on (master seed, index), never on schedule."""
    return np.random.SeedSequence(entropy=int(master_seed) & ((1 << 64) - 1), spawn_key=(tree_index,))


@dataclass
class ForestModel:
    trees: list[TreeModel]
    hyperparams: HyperParams
    n_features: int
    operator: str = ""
    schema_version: str = ""
    bootstrap: bool = True
    max_features: int | None = None
    meta: dict = field(default_factory=dict)

    def votes(self, X) -> np.ndarray:
        if not self.trees:
            raise ModelStateError("forest has no trees")
        return np.sum([t.predict(X) for t in self.trees], axis=0)

    def vote_fraction(self, X) -> np.ndarray:
        return self.votes(X) / len(self.trees)

    def predict(self, X) -> np.ndarray:
        # strict majority; a tie goes to the clean class
        return (2 * self.votes(X) > len(self.trees)).astype(np.int64)


def fit_forest_arrays(
    X,
    y,
    hp: HyperParams,
    bootstrap: bool = True,
    max_features: int | str | None = "auto",
    n_jobs: int = 1,
) -> ForestModel:
    X, y = _as_xy(X, y)
    n, d = X.shape
    if n == 0:
        raise TrainingError("cannot fit a forest on an empty dataset")
    if max_features == "auto":
        k = hp.feature_subset_size or auto_subset_size(d)
    else:
        k = max_features
    if k is not None and k >= d:
        k = None

    def build(i: int) -> TreeModel:
        rng = np.random.default_rng(tree_seed(hp.seed, i))
        if bootstrap:
            idx = rng.integers(0, n, size=n)
            Xi, yi = X[idx], y[idx]
        else:
            Xi, yi = X, y
        return fit_tree_arrays(Xi, yi, hp, max_features=k, rng=rng)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, range(hp.n_estimators)))
    else:
        trees = [build(i) for i in range(hp.n_estimators)]
    return ForestModel(trees, hp, d, bootstrap=bootstrap, max_features=k)
