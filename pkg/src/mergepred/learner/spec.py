"""Uniform fit/predict entry points keyed by classifier kind."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .baselines import Baseline1Model, fit_baseline1_arrays, fit_baseline2_arrays
from .forest import ForestModel, fit_forest_arrays
from .tree import DEFAULT_HP, HyperParams, TreeModel, fit_tree_arrays

KINDS = ("dt", "rf", "baseline1", "baseline2")
KIND_LABELS = {
    "baseline1": "Baseline #1",
    "baseline2": "Baseline #2",
    "dt": "Decision Tree",
    "rf": "Random Forest",
}

Model = TreeModel | ForestModel | Baseline1Model


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparams: HyperParams = field(default=DEFAULT_HP)
    n_jobs: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown classifier {self.kind!r}; expected one of {KINDS}")


def fit_model(spec: ModelSpec, X, y) -> Model:
    hp = spec.hyperparams
    if spec.kind == "dt":
        return fit_tree_arrays(X, y, hp)
    if spec.kind == "rf":
        return fit_forest_arrays(X, y, hp, n_jobs=spec.n_jobs)
    if spec.kind == "baseline1":
        return fit_baseline1_arrays(X, y)
    return fit_baseline2_arrays(X, y, hp)


def model_kind(model: Model) -> str:
    if isinstance(model, ForestModel):
        return "rf"
    if isinstance(model, Baseline1Model):
        return "baseline1"
    if model.feature_mask is not None:
        return "baseline2"
    return "dt"


def predict_model(model: Model, X, rng: np.random.Generator | None = None) -> np.ndarray:
    if isinstance(model, Baseline1Model):
        if rng is None:
            raise ConfigError("baseline #1 needs a random generator")
        return model.predict(X, rng)
    return model.predict(X)
