from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mergepred.catalog import local_repo_from_path
from mergepred.errors import ConfigError, ExtractionError, RangeError
from mergepred.features import (
    BRANCH_DIM,
    KEYWORDS,
    BranchFeatures,
    active_devs,
    branch_commit_count,
    branch_duration_hours,
    branch_features,
    changed_files,
    combine,
    commit_density,
    dimension,
    extract_feature_vector,
    feature_names,
    feature_set_ids,
    file_change_histogram,
    keyword_frequencies,
    line_churn,
    message_length_stats,
    normalize_operator,
    schema_version,
    simultaneous_changes,
)
from mergepred.miner import MergeScenario, enumerate_merges


@pytest.fixture(scope="module")
def scenarios(fixture_history):
    repo = local_repo_from_path(fixture_history.path)
    names = {v: k for k, v in fixture_history.merges.items()}
    return repo, {names[s.merge_commit]: s for s in enumerate_merges(repo).scenarios}


@pytest.mark.parametrize("name", ["M1", "M2", "M3", "M4", "M5"])
def test_fixture_features_exact(scenarios, fixture_history, name):
    repo, by = scenarios
    exp = fixture_history.expected[name]
    vec = extract_feature_vector(repo, by[name], "norm1")
    assert vec.simultaneous_files == exp.fs1
    assert vec.branch1 == exp.branch1
    assert vec.branch2 == exp.branch2
    want = [exp.fs1] + [abs(a) + abs(b) for a, b in zip(exp.branch1.as_vector(), exp.branch2.as_vector())]
    assert vec.values == want
    assert len(vec) == 28


def test_fixture_concat_order(scenarios, fixture_history):
    repo, by = scenarios
    exp = fixture_history.expected["M2"]
    vec = extract_feature_vector(repo, by["M2"], "concat")
    assert vec.values == [1, *exp.branch1.as_vector(), *exp.branch2.as_vector()]
    assert len(vec) == 55


def test_rename_counts_both_paths(scenarios):
    repo, by = scenarios
    sc = by["M3"]
    assert changed_files(repo, sc.ancestor, sc.parent2) == {"c.txt", "src/c2.txt"}
    assert file_change_histogram(repo, sc.ancestor, sc.parent2) == (0, 0, 1, 0, 0)


def test_operation_wrappers(scenarios):
    repo, by = scenarios
    sc = by["M2"]
    assert branch_commit_count(repo, sc.ancestor, sc.parent2) == 2
    assert commit_density(repo, sc.ancestor, sc.parent2) == 1
    assert line_churn(repo, sc.ancestor, sc.parent2) == (5, 2)
    assert active_devs(repo, sc.ancestor, sc.parent2) == 2
    assert branch_duration_hours(repo, sc.ancestor, sc.parent2) == 237.0
    m1 = by["M1"]
    assert active_devs(repo, m1.ancestor, m1.parent2) == 1  # same email, different case


def test_degenerate_range_is_zero(scenarios):
    repo, by = scenarios
    sc = by["M5"]
    assert branch_features(repo, sc.ancestor, sc.parent1) == BranchFeatures()
    assert branch_duration_hours(repo, sc.ancestor, sc.parent1) == 0.0


def test_invalid_ranges(scenarios):
    repo, by = scenarios
    sc = by["M1"]
    with pytest.raises(RangeError):
        branch_features(repo, sc.parent2, sc.parent1)  # not an ancestor
    with pytest.raises(RangeError):
        branch_features(repo, "0" * 40, sc.parent1)
    bad = MergeScenario(sc.repo, sc.merge_commit, sc.parent1, "f" * 40, sc.ancestor, 0)
    with pytest.raises(ExtractionError):
        extract_feature_vector(repo, bad)


def test_keyword_examples():
    counts = dict(zip(KEYWORDS, keyword_frequencies(["Fixed bugs; FIX the bug", "Added docs, addition", "used"])))
    assert counts["fix"] == 2 and counts["bug"] == 2
    assert counts["add"] == 2 and counts["document"] == 0 and counts["use"] == 1
    assert keyword_frequencies([]) == [0] * 12
    # underscores split tokens
    assert dict(zip(KEYWORDS, keyword_frequencies(["my_fix"])))["fix"] == 1


def test_message_length_stats():
    assert message_length_stats([]) == (0, 0, 0, 0)
    assert message_length_stats(["ab", "abcd"]) == (2, 4, 3, 3)
    assert message_length_stats(["a", "abc", "abcdefgh"]) == (1, 8, 4, 3)


def test_simultaneous_changes():
    assert simultaneous_changes({"a", "b"}, {"b", "c"}) == 1
    assert simultaneous_changes([], ["x"]) == 0


@given(st.lists(st.text(max_size=30), max_size=8))
def test_message_stats_ordering(messages):
    lo, hi, mean, median = message_length_stats(messages)
    assert lo <= median <= hi
    assert lo <= mean <= hi


_vals = st.lists(st.integers(0, 10**6).map(float), min_size=BRANCH_DIM, max_size=BRANCH_DIM)


@given(_vals, _vals)
def test_operator_agreement(a, b):
    mn, mx = combine(a, b, "min"), combine(a, b, "max")
    avg, med = combine(a, b, "avg"), combine(a, b, "median")
    n1, n2 = combine(a, b, "norm1"), combine(a, b, "norm2")
    assert med == avg
    for i in range(BRANCH_DIM):
        assert mn[i] <= avg[i] <= mx[i]
        assert n1[i] >= mx[i]
        assert mx[i] <= n2[i] * (1 + 1e-12) and n2[i] <= n1[i] * (1 + 1e-12)
    assert combine(a, b, "concat") == a + b


@given(_vals, _vals)
def test_symmetric_operators(a, b):
    for op in ("min", "max", "avg", "median", "norm1", "norm2"):
        assert combine(a, b, op) == combine(b, a, op)


def test_combine_examples():
    assert combine([3.0], [4.0], "norm2") == [5.0]
    assert combine([-3.0], [4.0], "norm1") == [7.0]
    with pytest.raises(ValueError):
        combine([1.0], [1.0, 2.0], "max")


def test_operator_names_and_dimensions():
    assert normalize_operator("Norm-1") == "norm1"
    assert normalize_operator("average") == "avg"
    with pytest.raises(ConfigError):
        normalize_operator("geometric")
    assert dimension("norm1") == 28 and dimension("concat") == 55
    names = feature_names("norm1")
    assert names[0] == "fs1_simultaneous_files" and len(names) == 28 == len(set(names))
    assert len(feature_names("concat")) == 55 == len(set(feature_names("concat")))
    ids = feature_set_ids()
    assert ids[0] == 1 and sorted(set(ids)) == list(range(1, 10))
    assert [ids.count(k) for k in range(1, 10)] == [1, 1, 1, 5, 2, 1, 12, 4, 1]
    assert schema_version() == "1"


def test_branch_vector_layout():
    v = BranchFeatures(commit_count=7, duration_hours=2.5, keyword_freqs=tuple(range(12))).as_vector()
    assert len(v) == 27 and v[0] == 7 and v[-1] == 2.5 and v[10:22] == [float(i) for i in range(12)]
    assert all(isinstance(x, float) for x in v)
    assert not any(math.isnan(x) for x in v)
