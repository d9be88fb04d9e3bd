"""From-scratch tree learners, baselines, and model selection."""

from __future__ import annotations

import numpy as np

from ..errors import SchemaError
from .baselines import Baseline1Model, fit_baseline1_arrays, fit_baseline2_arrays, predict_baseline1
from .forest import ForestModel, fit_forest_arrays, tree_seed
from .grid import DEFAULT_GRID, grid_search
from .serialize import dumps, load_model, loads, save_model
from .spec import KINDS, ModelSpec, fit_model, model_kind, predict_model
from .tree import (
    CLEAN,
    CONFLICT,
    DEFAULT_HP,
    HyperParams,
    Node,
    Split,
    TreeModel,
    best_split,
    fit_tree_arrays,
    gini,
)


def _xy(data):
    if isinstance(data, tuple):
        return data
    return data.X, data.y


def _stamp(model, data):
    if not isinstance(data, tuple):
        model.operator = data.operator
        model.schema_version = data.schema_version
        if isinstance(model, ForestModel):
            for t in model.trees:
                t.operator, t.schema_version = data.operator, data.schema_version
    return model


def fit_tree(data, hp: HyperParams = DEFAULT_HP, feature_mask=None) -> TreeModel:
    """``data`` is a LabeledDataset or an ``(X, y)`` pair."""
    return _stamp(fit_tree_arrays(*_xy(data), hp, feature_mask=feature_mask), data)


def fit_forest(data, hp: HyperParams = DEFAULT_HP, bootstrap: bool = True, max_features="auto",
               n_jobs: int = 1) -> ForestModel:
    return _stamp(fit_forest_arrays(*_xy(data), hp, bootstrap=bootstrap, max_features=max_features,
                                    n_jobs=n_jobs), data)


def fit_baseline1(data) -> Baseline1Model:
    m = fit_baseline1_arrays(*_xy(data))
    if not isinstance(data, tuple):
        m = Baseline1Model(m.p, m.n_features, data.operator, data.schema_version)
    return m


def fit_baseline2(data, hp: HyperParams = DEFAULT_HP) -> TreeModel:
    return _stamp(fit_baseline2_arrays(*_xy(data), hp), data)


def train(spec: ModelSpec, data):
    if spec.kind == "baseline1":
        return fit_baseline1(data)
    if spec.kind == "rf":
        return fit_forest(data, spec.hyperparams, n_jobs=spec.n_jobs)
    if spec.kind == "baseline2":
        return fit_baseline2(data, spec.hyperparams)
    return fit_tree(data, spec.hyperparams)


def predict(model, x, rng: np.random.Generator | None = None):
    """Label (1 conflict / 0 clean) for one vector; forests also return the vote fraction."""
    values = x.values if hasattr(x, "values") and not isinstance(x, np.ndarray) else x
    if hasattr(x, "operator") and model.operator and x.operator != model.operator:
        raise SchemaError(f"vector built with {x.operator!r}, model expects {model.operator!r}")
    arr = np.asarray(values, dtype=np.float64)[None, :]
    if arr.shape[1] != model.n_features:
        raise SchemaError(f"model expects {model.n_features} features, got {arr.shape[1]}")
    if isinstance(model, ForestModel):
        frac = float(model.vote_fraction(arr)[0])
        return int(model.predict(arr)[0]), frac
    if isinstance(model, Baseline1Model):
        return int(model.predict(arr, rng or np.random.default_rng())[0]), model.p
    return int(model.predict(arr)[0]), None


__all__ = [
    "CLEAN", "CONFLICT", "DEFAULT_HP", "DEFAULT_GRID", "KINDS",
    "Baseline1Model", "ForestModel", "HyperParams", "ModelSpec", "Node", "Split", "TreeModel",
    "best_split", "dumps", "fit_baseline1", "fit_baseline2", "fit_forest", "fit_model", "fit_tree",
    "gini", "grid_search", "load_model", "loads", "model_kind", "predict", "predict_baseline1",
    "predict_model", "save_model", "train", "tree_seed",
]
