"""Which feature sets go together with conflicts.

Two views: Spearman rank correlation of every feature with the conflict
label, and mean-decrease-in-Gini importance taken from a trained tree.
Feature sets with several members get the mean over their members in both
views.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .dataset import LabeledDataset
from .errors import DegenerateInputError, InputError, ModelStateError
from .features import feature_names, feature_set_ids
from .learner.forest import ForestModel
from .learner.tree import TreeModel

SIGNIFICANCE = 0.05
EXACT_PERMUTATION_MAX_N = 8
FEATURE_SETS = tuple(range(1, 10))
FEATURE_SET_TITLES = {
    1: "simultaneously changed files",
    2: "commits in branch",
    3: "commits in last week",
    4: "changed files by kind",
    5: "added/deleted lines",
    6: "active developers",
    7: "message keywords",
    8: "message lengths",
    9: "branch duration",
}


def rank_with_ties(values: Sequence[float]) -> list[float]:
    """1-based ranks; each group of equal values gets the mean of its positions."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise InputError("cannot rank an empty sequence")
    order = np.argsort(vals, kind="stable")
    ranks = np.empty(len(vals), dtype=np.float64)
    i = 0
    n = len(vals)
    while i < n:
        j = i
        while j + 1 < n and vals[order[j + 1]] == vals[order[i]]:
            j += 1
        # positions i..j (0-based) hold equal values -> mean rank (i+j)/2 + 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks.tolist()


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    return float(np.dot(da, db)) / denom


def _t_pvalue(rho: float, n: int) -> float:
    if abs(rho) >= 1.0:
        return 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    return float(min(1.0, 2.0 * stats.t.sf(abs(t), n - 2)))


def _permutation_pvalue(rx: np.ndarray, ry: np.ndarray, rho: float) -> float:
    hits = 0
    total = 0
    for perm in itertools.permutations(ry):
        total += 1
        if abs(_pearson(rx, np.asarray(perm))) >= abs(rho) - 1e-12:
            hits += 1
    return hits / total


def spearman(x: Sequence[float], y: Sequence[float], exact: bool = False) -> tuple[float, float]:
    """Spearman's rho with a two-sided p-value.

    The p-value uses the t approximation ``t = rho*sqrt((n-2)/(1-rho^2))``
    unless ``exact`` is set, in which case all permutations of ``y`` are
    enumerated (only allowed for n <= 8).
    """
    if len(x) != len(y):
        raise InputError(f"length mismatch: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise DegenerateInputError(f"need at least 3 pairs, got {n}")
    rx = np.asarray(rank_with_ties(x))
    ry = np.asarray(rank_with_ties(y))
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise DegenerateInputError("constant input has no rank correlation")
    rho = max(-1.0, min(1.0, _pearson(rx, ry)))
    if exact:
        if n > EXACT_PERMUTATION_MAX_N:
            raise InputError(f"exact permutation p-value limited to n <= {EXACT_PERMUTATION_MAX_N}")
        return rho, _permutation_pvalue(rx, ry, rho)
    return rho, _t_pvalue(rho, n)


def strength(coefficient: float, p_value: float) -> str:
    if p_value >= SIGNIFICANCE:
        return "insignificant"
    cc = abs(coefficient)
    if cc >= 0.6:
        return "strong"
    if cc >= 0.4:
        return "medium"
    if cc >= 0.2:
        return "weak"
    return "negligible"


@dataclass(frozen=True)
class CorrelationEntry:
    feature_set_id: int
    coefficient: float
    p_value: float
    strength: str
    members: int


@dataclass(frozen=True)
class ImportanceEntry:
    feature_set_id: int
    importance: float


@dataclass
class CorrelationReport:
    entries: list[CorrelationEntry]
    per_feature: list[dict]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "entries": [asdict(e) for e in self.entries],
            "per_feature": self.per_feature,
            "meta": self.meta,
        }


def correlation_report(dataset: LabeledDataset, exact: bool = False) -> CorrelationReport:
    """One entry per feature set: member correlations with the label, averaged.

    A member that is constant over the dataset carries no rank information;
    it contributes rho 0 and p 1 and is listed in ``meta["constant_features"]``.
    """
    y = dataset.y
    conflicts, cleans = int(y.sum()), int(len(y) - y.sum())
    if conflicts < 3 or cleans < 3:
        raise DegenerateInputError(f"need >= 3 records per class, have {conflicts} conflicts / {cleans} clean")
    X = dataset.X
    names = feature_names(dataset.operator)
    sets = feature_set_ids(dataset.operator)
    per_feature = []
    constant = []
    for j, name in enumerate(names):
        try:
            rho, p = spearman(X[:, j], y, exact=exact)
        except DegenerateInputError:
            rho, p = 0.0, 1.0
            constant.append(name)
        per_feature.append({"feature": name, "feature_set_id": sets[j], "coefficient": rho, "p_value": p})
    entries = []
    for fs in FEATURE_SETS:
        members = [r for r in per_feature if r["feature_set_id"] == fs]
        cc = float(np.mean([m["coefficient"] for m in members]))
        p = float(np.mean([m["p_value"] for m in members]))
        entries.append(CorrelationEntry(fs, cc, p, strength(cc, p), len(members)))
    meta = {
        "method": "spearman",
        "p_value": "exact-permutation" if exact else "t-approximation",
        "set_aggregation": "mean over member features (coefficient and p-value)",
        "label_encoding": {"conflict": 1, "clean": 0},
        "records": len(y),
        "constant_features": constant,
    }
    return CorrelationReport(entries, per_feature, meta)


def _trees(model) -> list[TreeModel]:
    if isinstance(model, ForestModel):
        return model.trees
    if isinstance(model, TreeModel):
        return [model]
    raise ModelStateError(f"no tree structure in {type(model).__name__}")


def feature_importances(model) -> np.ndarray:
    """Per-feature mean decrease in Gini, weighted by node sample share, summing to 1.

    Forests average the normalised importances of their trees. A tree with no
    split yields all zeros.
    """
    trees = _trees(model)
    if not trees or not trees[0].nodes:
        raise ModelStateError("model has not been trained")
    out = np.zeros(trees[0].n_features)
    for tree in trees:
        imp = np.zeros(tree.n_features)
        root_n = tree.nodes[0].n
        for node in tree.split_nodes:
            imp[node.feature] += (node.n / root_n) * node.gain
        total = imp.sum()
        if total > 0:
            out += imp / total
    total = out.sum()
    return out / total if total > 0 else out


def feature_importance(model, operator: str | None = None) -> list[ImportanceEntry]:
    op = operator or getattr(model, "operator", "") or "norm1"
    imp = feature_importances(model)
    sets = np.asarray(feature_set_ids(op))
    if len(sets) != len(imp):
        raise ModelStateError(f"model has {len(imp)} features, schema {op!r} has {len(sets)}")
    return [ImportanceEntry(fs, float(imp[sets == fs].mean())) for fs in FEATURE_SETS]


def format_correlation_table(report: CorrelationReport, importance: list[ImportanceEntry] | None = None) -> str:
    imp = {e.feature_set_id: e.importance for e in importance or []}
    header = ["Feature Set", "Description", "CC", "p", "Strength"] + (["Importance"] if imp else [])
    rows = [header]
    for e in report.entries:
        row = [str(e.feature_set_id), FEATURE_SET_TITLES[e.feature_set_id], f"{e.coefficient:.2f}",
               f"{e.p_value:.2f}", e.strength]
        if imp:
            row.append(f"{imp[e.feature_set_id]:.2f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for j, r in enumerate(rows):
        lines.append("  ".join(c.ljust(widths[i]) if i < 2 or i == 4 else c.rjust(widths[i]) for i, c in enumerate(r)))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
