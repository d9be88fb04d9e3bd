from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fs1_informative, make_dataset
from mergepred.errors import FoldError, InputError, SchemaError
from mergepred.evaluator import (
    class_metrics,
    confusion,
    cross_validate,
    dataset_fingerprint,
    evaluate_model,
    format_table,
    label_code,
    prf,
    stratified_folds,
    time_ordered_folds,
    zero_division_flags,
)
from mergepred.learner import DEFAULT_HP, ModelSpec, fit_tree

TRUTH = ["C", "S", "S", "C", "S", "S"]
PRED = ["S", "S", "C", "C", "S", "C"]


def exact_prf(truth, pred, target):
    tp = sum(t == target and p == target for t, p in zip(truth, pred))
    fp = sum(t != target and p == target for t, p in zip(truth, pred))
    fn = sum(t == target and p != target for t, p in zip(truth, pred))
    precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
    return precision, recall, f1


def test_worked_example():
    p_c, r_c, _ = prf(confusion(TRUTH, PRED, "C"))
    p_s, r_s, _ = prf(confusion(TRUTH, PRED, "S"))
    assert r_c == 0.5 and abs(p_c - 1 / 3) <= 1e-12
    assert r_s == 0.5 and abs(p_s - 2 / 3) <= 1e-12


@settings(max_examples=200)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40))
def test_prf_matches_rational_oracle(pairs):
    truth = ["C" if t else "S" for t, _ in pairs]
    pred = ["C" if p else "S" for _, p in pairs]
    for target in ("C", "S"):
        got = prf(confusion(truth, pred, target))
        want = exact_prf(truth, pred, target)
        assert all(abs(g - float(w)) <= 1e-12 for g, w in zip(got, want))


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40))
def test_swapping_labels_swaps_classes(pairs):
    truth = [int(t) for t, _ in pairs]
    pred = [int(p) for _, p in pairs]
    a = class_metrics(truth, pred)
    b = class_metrics([1 - t for t in truth], [1 - p for p in pred])
    assert a["conflict"] == b["safe"] and a["safe"] == b["conflict"]


def test_zero_division_is_zero_and_flagged():
    c = confusion([0, 0, 0], [0, 0, 0], "C")
    assert prf(c) == (0.0, 0.0, 0.0)
    assert zero_division_flags(c) == ["precision_conflict", "recall_conflict"]


def test_label_codes_and_input_errors():
    assert [label_code(v) for v in ("C", "safe", "clean", 1, 0, np.int64(1))] == [1, 0, 0, 1, 0, 1]
    with pytest.raises(InputError):
        label_code("maybe")
    with pytest.raises(InputError):
        confusion([1], [1, 0])
    with pytest.raises(InputError):
        confusion([], [])


@settings(max_examples=50, deadline=None)
@given(st.integers(10, 120), st.integers(2, 10), st.integers(0, 1000), st.floats(0.1, 0.5))
def test_stratified_folds_partition(n, k, seed, rate):
    y = (np.random.default_rng(seed).random(n) < rate).astype(int)
    if min(y.sum(), n - y.sum()) < k:
        with pytest.raises(FoldError):
            stratified_folds(y, k, seed)
        return
    folds = stratified_folds(y, k, seed)
    flat = np.concatenate(folds)
    assert sorted(flat.tolist()) == list(range(n))
    for cls in (0, 1):
        total = int((y == cls).sum())
        for f in folds:
            assert abs(int((y[f] == cls).sum()) - total / k) < 1
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert [f.tolist() for f in stratified_folds(y, k, seed)] == [f.tolist() for f in folds]


def test_time_ordered_folds():
    folds = time_ordered_folds([5, 1, 4, 2, 3, 0], k=3)
    assert [f.tolist() for f in folds] == [[1, 5], [3, 4], [0, 2]]
    with pytest.raises(FoldError):
        time_ordered_folds([1, 2], k=3)


@pytest.fixture(scope="module")
def ds():
    X, y = fs1_informative(300, seed=21)
    return make_dataset(X, y)


def test_cross_validate_report(ds):
    rep = cross_validate(ModelSpec("dt", DEFAULT_HP), ds, k=5, seed=3)
    assert rep.protocol == {"mode": "stratified", "k": 5, "seed": 3, "headline": "pooled"}
    assert len(rep.folds) == 5 and sum(f["n"] for f in rep.folds) == len(ds)
    assert rep.pooled["conflict"]["f1"] > 0.9
    assert "accuracy" not in rep.to_dict()["pooled"]["conflict"]
    assert rep.dataset["sha256"] == dataset_fingerprint(ds)
    c = rep.confusion
    assert c["tp"] + c["fn"] == ds.class_counts[0]
    again = cross_validate(ModelSpec("dt", DEFAULT_HP), ds, k=5, seed=3)
    assert again.to_dict() == rep.to_dict()
    chrono = cross_validate(ModelSpec("dt", DEFAULT_HP), ds, k=5, chronological=True)
    assert chrono.protocol["mode"] == "chronological"


def test_fold_sd_is_sample_sd(ds):
    rep = cross_validate(ModelSpec("baseline1"), ds, k=4, seed=0)
    vals = [f["conflict"]["f1"] for f in rep.folds]
    assert rep.fold_sd["conflict"]["f1"] == pytest.approx(np.std(vals, ddof=1))
    assert rep.hyperparams == {}


def test_evaluate_model_checks_schema(ds):
    model = fit_tree(ds)
    rep = evaluate_model(model, ds)
    assert rep.protocol["mode"] == "held-out" and rep.classifier == "dt"
    concat = make_dataset(np.zeros((4, 55)), [1, 0, 1, 0], operator="concat")
    with pytest.raises(SchemaError):
        evaluate_model(model, concat)


def test_format_table(ds):
    reps = [cross_validate(ModelSpec(k, DEFAULT_HP.with_(n_estimators=5)), ds, k=3) for k in ("rf", "baseline1")]
    text = format_table(reps, title="t")
    lines = text.splitlines()
    assert lines[0] == "t" and lines[1].split()[:2] == ["Classifier", "Precision_S"]
    assert lines[3].startswith("Random Forest") and lines[4].startswith("Baseline #1")
