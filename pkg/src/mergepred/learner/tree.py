"""CART classification tree with Gini impurity.

Labels are integers: 1 = conflict, 0 = clean. Splits send ``x <= threshold``
left; thresholds sit at midpoints between adjacent distinct observed values.
Among equally good splits the lowest feature index wins, then the lowest
threshold.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from ..errors import ModelStateError, SchemaError, TrainingError

CONFLICT = 1
CLEAN = 0

# gains closer than this are treated as ties
GAIN_TOL = 1e-12


@dataclass(frozen=True)
class HyperParams:
    min_samples_leaf: int = 10
    min_samples_split: int = 5
    max_depth: int = 7
    n_estimators: int = 75
    feature_subset_size: int | None = None
    seed: int = 0
    conflict_weight: float = 1.0

    def __post_init__(self):
        for name in ("min_samples_leaf", "max_depth", "n_estimators"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.feature_subset_size is not None and self.feature_subset_size < 1:
            raise ValueError("feature_subset_size must be >= 1")
        if not (self.conflict_weight > 0):
            raise ValueError("conflict_weight must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def with_(self, **kw) -> "HyperParams":
        return replace(self, **kw)


# tuned default: leaf 10, split 5, depth 7, 75 estimators
DEFAULT_HP = HyperParams(min_samples_leaf=10, min_samples_split=5, max_depth=7, n_estimators=75)


@dataclass
class Node:
    conflicts: int
    cleans: int
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    gain: float = 0.0
    depth: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    @property
    def n(self) -> int:
        return self.conflicts + self.cleans


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    gain: float


@dataclass
class TreeModel:
    nodes: list[Node]
    n_features: int
    hyperparams: HyperParams
    operator: str = ""
    schema_version: str = ""
    feature_mask: tuple[int, ...] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return max((n.depth for n in self.nodes), default=0)

    @property
    def split_nodes(self) -> list[Node]:
        return [n for n in self.nodes if not n.is_leaf]

    def _check(self, X: np.ndarray) -> np.ndarray:
        if not self.nodes:
            raise ModelStateError("tree has not been trained")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise SchemaError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X

    def leaf_index(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.empty(len(X), dtype=np.int64)
        stack = [(0, np.arange(len(X)))]
        while stack:
            node_id, idx = stack.pop()
            node = self.nodes[node_id]
            if node.is_leaf or len(idx) == 0:
                out[idx] = node_id
                continue
            go_left = X[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return out

    def predict(self, X) -> np.ndarray:
        w = self.hyperparams.conflict_weight
        leaves = self.leaf_index(X)
        table = np.array([1 if w * n.conflicts > n.cleans else 0 for n in self.nodes], dtype=np.int64)
        return table[leaves]

    def conflict_fraction(self, X) -> np.ndarray:
        leaves = self.leaf_index(X)
        table = np.array([n.conflicts / n.n if n.n else 0.0 for n in self.nodes])
        return table[leaves]


def gini(class_counts: Sequence[float]) -> float:
    total = float(sum(class_counts))
    if total <= 0:
        return 0.0
    return 1.0 - sum((c / total) ** 2 for c in class_counts)


def _as_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise TrainingError(f"bad training shapes X{X.shape} y{y.shape}")
    return X, y


def best_split(X, y, candidate_features: Sequence[int], hp: HyperParams) -> Split | None:
    """Best Gini split over ``candidate_features`` honouring ``min_samples_leaf``.

    Returns ``None`` when no admissible split has positive impurity decrease.
    """
    X, y = _as_xy(X, y)
    n = len(y)
    if n < 2:
        return None
    w = hp.conflict_weight
    leaf = hp.min_samples_leaf
    c_total = float(y.sum())
    pos_total = w * c_total
    neg_total = n - c_total
    wn = pos_total + neg_total
    parent_sq = (pos_total**2 + neg_total**2) / wn**2

    best: Split | None = None
    best_gain = GAIN_TOL
    sizes = np.arange(1, n)
    for f in sorted(candidate_features):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        c_left = np.cumsum(y[order])[:-1].astype(np.float64)
        ok = (xs[1:] > xs[:-1]) & (sizes >= leaf) & (n - sizes >= leaf)
        if not ok.any():
            continue
        pl = w * c_left
        nl = sizes - c_left
        pr = pos_total - pl
        nr = (n - sizes) - (c_total - c_left)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = (pl**2 + nl**2) / (pl + nl) + (pr**2 + nr**2) / (pr + nr)
        gains = score / wn - parent_sq
        gains = np.where(ok, gains, -np.inf)
        top = gains.max()
        if top > best_gain + GAIN_TOL or (best is None and top > GAIN_TOL):
            i = int(np.flatnonzero(gains >= top - GAIN_TOL)[0])
            lo, hi = xs[i], xs[i + 1]
            thr = (lo + hi) / 2.0
            if not (lo <= thr < hi):
                thr = lo
            best = Split(int(f), float(thr), float(top))
            best_gain = top
    return best


def fit_tree_arrays(
    X,
    y,
    hp: HyperParams,
    feature_mask: Sequence[int] | None = None,
    max_features: int | None = None,
    rng: np.random.Generator | None = None,
) -> TreeModel:
    """Grow a tree depth-first. ``max_features`` enables per-node subsampling."""
    X, y = _as_xy(X, y)
    if len(y) == 0:
        raise TrainingError("cannot fit a tree on an empty dataset")
    d = X.shape[1]
    features = sorted(set(feature_mask)) if feature_mask is not None else list(range(d))
    if not features or min(features) < 0 or max(features) >= d:
        raise TrainingError(f"feature mask {feature_mask} invalid for {d} features")
    if max_features is not None and max_features < len(features) and rng is None:
        raise TrainingError("feature subsampling needs a random generator")

    nodes: list[Node] = []

    def grow(idx: np.ndarray, depth: int) -> int:
        yi = y[idx]
        conflicts = int(yi.sum())
        node_id = len(nodes)
        nodes.append(Node(conflicts, len(idx) - conflicts, depth=depth))
        if depth >= hp.max_depth or len(idx) < hp.min_samples_split or conflicts in (0, len(idx)):
            return node_id
        cand = features
        if max_features is not None and max_features < len(features):
            cand = sorted(rng.choice(features, size=max_features, replace=False).tolist())
        split = best_split(X[idx], yi, cand, hp)
        if split is None:
            return node_id
        go_left = X[idx, split.feature] <= split.threshold
        node = nodes[node_id]
        node.feature, node.threshold, node.gain = split.feature, split.threshold, split.gain
        node.left = grow(idx[go_left], depth + 1)
        node.right = grow(idx[~go_left], depth + 1)
        return node_id

    grow(np.arange(len(y)), 0)
    return TreeModel(
        nodes=nodes,
        n_features=d,
        hyperparams=hp,
        feature_mask=tuple(features) if feature_mask is not None else None,
    )


def auto_subset_size(n_features: int) -> int:
    return max(1, math.ceil(math.sqrt(n_features)))
