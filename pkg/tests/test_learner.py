from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import cart_oracle
from helpers import fs1_informative, make_dataset
from mergepred.errors import ConfigError, ModelStateError, SchemaError, TrainingError
from mergepred.learner import (
    DEFAULT_HP,
    Baseline1Model,
    ForestModel,
    HyperParams,
    ModelSpec,
    TreeModel,
    best_split,
    dumps,
    fit_baseline1,
    fit_baseline2,
    fit_forest,
    fit_tree,
    gini,
    grid_search,
    load_model,
    loads,
    model_kind,
    predict,
    predict_baseline1,
    save_model,
    train,
    tree_seed,
)
from mergepred.learner.grid import expand_grid


def random_case(rng):
    n = int(rng.integers(2, 31))
    d = int(rng.integers(1, 4))
    X = rng.integers(0, int(rng.integers(2, 8)), size=(n, d)).astype(float)
    y = (rng.random(n) < rng.uniform(0.2, 0.8)).astype(int)
    hp = HyperParams(
        min_samples_leaf=int(rng.integers(1, 5)),
        min_samples_split=int(rng.integers(2, 7)),
        max_depth=int(rng.integers(1, 6)),
    )
    return X, y, hp


def check_against_oracle(X, y, hp):
    model = fit_tree((X, y), hp)
    ref = cart_oracle.grow(X.tolist(), y.tolist(), hp.min_samples_leaf, hp.min_samples_split, hp.max_depth)
    assert cart_oracle.from_model(model) == ref
    assert model.predict(X).tolist() == [cart_oracle.predict(ref, r) for r in X.tolist()]


def test_tree_matches_exhaustive_oracle():
    rng = np.random.default_rng(1234)
    for _ in range(60):
        check_against_oracle(*random_case(rng))


def test_gini_and_one_dimensional_split():
    assert gini((1, 3)) == pytest.approx(0.375)
    assert gini((5, 0)) == 0.0
    X = np.arange(1, 11, dtype=float)[:, None]
    y = np.array([0] * 5 + [1] * 5)
    s = best_split(X, y, [0], HyperParams(min_samples_leaf=1))
    assert (s.feature, s.threshold, s.gain) == (0, 5.5, pytest.approx(0.5))
    assert best_split(X, y, [0], HyperParams(min_samples_leaf=6)) is None


def test_split_ties_prefer_lower_feature():
    X = np.array([[0, 0], [0, 0], [1, 1], [1, 1]], dtype=float)
    y = np.array([0, 0, 1, 1])
    assert best_split(X, y, [1, 0], HyperParams(min_samples_leaf=1)).feature == 0


def test_constant_features_give_a_leaf():
    X = np.ones((20, 3))
    y = np.array([0, 1] * 10)
    model = fit_tree((X, y), HyperParams(min_samples_leaf=1))
    assert len(model.nodes) == 1
    # 10 vs 10 at the leaf: a tie predicts clean
    assert model.predict(X).tolist() == [0] * 20


def test_depth_limit():
    X, y = fs1_informative(300, seed=2)
    X[:, 0] += np.random.default_rng(0).random(300)
    model = fit_tree((X, y), HyperParams(min_samples_leaf=1, min_samples_split=2, max_depth=2))
    assert model.depth <= 2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 100.0), st.floats(-50, 50))
def test_positive_affine_rescaling_keeps_predictions(seed, scale, shift):
    rng = np.random.default_rng(seed)
    X, y, hp = random_case(rng)
    base = fit_tree((X, y), hp)
    moved = fit_tree((X * scale + shift, y), hp)
    assert [n.feature for n in base.nodes] == [n.feature for n in moved.nodes]
    assert base.predict(X).tolist() == moved.predict(X * scale + shift).tolist()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_children_respect_min_leaf(seed):
    X, y, hp = random_case(np.random.default_rng(seed))
    model = fit_tree((X, y), hp)
    for node in model.split_nodes:
        assert model.nodes[node.left].n >= hp.min_samples_leaf
        assert model.nodes[node.right].n >= hp.min_samples_leaf
        assert node.n >= hp.min_samples_split
        assert node.gain > 0


def test_forest_is_deterministic_and_schedule_free():
    X, y = fs1_informative(200, seed=3)
    hp = DEFAULT_HP.with_(n_estimators=12, seed=7)
    a = fit_forest((X, y), hp)
    b = fit_forest((X, y), hp, n_jobs=4)
    assert dumps(a) == dumps(b)
    c = fit_forest((X, y), hp.with_(seed=8))
    assert dumps(a) != dumps(c)
    assert a.max_features == 6  # ceil(sqrt(28))


def test_tree_seed_is_independent_per_tree():
    s0, s1 = tree_seed(5, 0), tree_seed(5, 1)
    assert np.random.default_rng(s0).random() != np.random.default_rng(s1).random()
    assert np.random.default_rng(tree_seed(5, 1)).random() == np.random.default_rng(s1).random()


def test_forest_votes_and_tie_rule():
    X, y = fs1_informative(200, seed=4)
    model = fit_forest((X, y), DEFAULT_HP.with_(n_estimators=4))
    frac = model.vote_fraction(X)
    assert ((model.predict(X) == 1) == (frac > 0.5)).all()
    label, f = predict(model, X[0])
    assert f == frac[0] and label == model.predict(X[:1])[0]


def test_forest_learns_informative_column():
    X, y = fs1_informative(400, seed=5)
    model = fit_forest((X, y), DEFAULT_HP.with_(n_estimators=25))
    assert (model.predict(X) == y).mean() > 0.95


def test_baselines():
    X, y = fs1_informative(400, seed=6)
    ds = make_dataset(X, y)
    b1 = fit_baseline1(ds)
    assert isinstance(b1, Baseline1Model) and b1.p == pytest.approx(y.mean())
    assert b1.operator == "norm1"
    draws = predict_baseline1(0.3, np.random.default_rng(0), 50_000)
    assert abs(draws.mean() - 0.3) < 0.01
    assert predict_baseline1(1.0, np.random.default_rng(0)) == 1
    b2 = fit_baseline2(ds)
    assert model_kind(b2) == "baseline2"
    assert {n.feature for n in b2.split_nodes} == {0}


def test_fit_errors():
    with pytest.raises(TrainingError):
        fit_tree((np.zeros((0, 2)), np.zeros(0)))
    with pytest.raises(TrainingError):
        fit_tree((np.zeros((4, 2)), np.zeros(4)), feature_mask=[5])
    with pytest.raises(ValueError):
        HyperParams(min_samples_split=1)
    with pytest.raises(ConfigError):
        ModelSpec("svm")
    with pytest.raises(ModelStateError):
        TreeModel([], 3, DEFAULT_HP).predict(np.zeros((1, 3)))


def test_predict_checks_width():
    X, y = fs1_informative(100, seed=8)
    model = fit_tree((X, y))
    with pytest.raises(SchemaError):
        predict(model, np.zeros(27))
    assert predict(model, X[0])[1] is None


@pytest.mark.parametrize("kind", ["dt", "rf", "baseline1", "baseline2"])
def test_serialization_roundtrip(kind, tmp_path):
    X, y = fs1_informative(150, seed=9)
    X[:, 5] = X[:, 5] / 3  # thresholds that are not exactly representable in decimal
    ds = make_dataset(X, y)
    model = train(ModelSpec(kind, DEFAULT_HP.with_(n_estimators=5)), ds)
    path = save_model(model, tmp_path / f"{kind}.json")
    again = load_model(path)
    assert model_kind(again) == kind
    assert dumps(again) == path.read_text(encoding="utf-8")
    if kind != "baseline1":
        assert again.predict(X).tolist() == model.predict(X).tolist()
    assert again.operator == "norm1" and again.schema_version == "1"
    assert json.loads(dumps(model))["format_version"] == 1


def test_serialization_rejects_unknown_format():
    X, y = fs1_informative(60, seed=10)
    doc = json.loads(dumps(fit_tree((X, y))))
    doc["format_version"] = 99
    with pytest.raises(SchemaError):
        loads(json.dumps(doc))


def test_forest_training_deterministic_bytes():
    X, y = fs1_informative(150, seed=11)
    hp = DEFAULT_HP.with_(n_estimators=6)
    assert dumps(fit_forest((X, y), hp)) == dumps(fit_forest((X, y), hp))
    assert isinstance(fit_forest((X, y), hp), ForestModel)


def test_expand_grid():
    cells = expand_grid({"max_depth": [1, 3], "n_estimators": [1, 5]}, "dt", DEFAULT_HP)
    assert [c.max_depth for c in cells] == [1, 3]
    assert len(expand_grid({"max_depth": [1, 3], "n_estimators": [1, 5]}, "rf", DEFAULT_HP)) == 4
    with pytest.raises(ConfigError):
        expand_grid({"gamma": [1]}, "rf", DEFAULT_HP)


def test_grid_search_prefers_smaller_models_on_ties():
    X, y = fs1_informative(200, seed=12)
    ds = make_dataset(X, y)
    best, rows = grid_search(ds, {"max_depth": [1, 3], "n_estimators": [3, 1]}, k=5, kind="rf")
    assert len(rows) == 4
    top = max(r.mean_f1_conflict for r in rows)
    winners = [r.hyperparams for r in rows if r.mean_f1_conflict >= top - 1e-12]
    assert (best.n_estimators, best.max_depth) == min((w["n_estimators"], w["max_depth"]) for w in winners)
    again, _ = grid_search(ds, {"max_depth": [1, 3], "n_estimators": [3, 1]}, k=5, kind="rf")
    assert again == best
    with pytest.raises(ConfigError):
        grid_search(ds, {"max_depth": [1]}, kind="baseline1")
