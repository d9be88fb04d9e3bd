"""Versioned JSON model files.

Thresholds and gains are stored as decimal strings (``repr`` of the float),
which round-trips exactly and keeps the file byte-stable across runs.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from ..errors import SchemaError
from .baselines import Baseline1Model
from .forest import ForestModel
from .spec import Model, model_kind
from .tree import HyperParams, Node, TreeModel

FORMAT = "mergepred-model"
FORMAT_VERSION = 1


def _node_to_dict(node: Node) -> dict:
    d = {"counts": [node.conflicts, node.cleans], "depth": node.depth}
    if not node.is_leaf:
        d.update(
            feature=node.feature,
            threshold=repr(float(node.threshold)),
            left=node.left,
            right=node.right,
            gain=repr(float(node.gain)),
        )
    return d


def _node_from_dict(d: dict) -> Node:
    conflicts, cleans = d["counts"]
    if "feature" in d:
        return Node(
            conflicts,
            cleans,
            feature=int(d["feature"]),
            threshold=float(d["threshold"]),
            left=int(d["left"]),
            right=int(d["right"]),
            gain=float(d["gain"]),
            depth=int(d["depth"]),
        )
    return Node(conflicts, cleans, depth=int(d["depth"]))


def _tree_to_dict(tree: TreeModel) -> dict:
    return {
        "nodes": [_node_to_dict(n) for n in tree.nodes],
        "feature_mask": list(tree.feature_mask) if tree.feature_mask is not None else None,
    }


def _tree_from_dict(d: dict, n_features: int, hp: HyperParams, operator: str, schema: str) -> TreeModel:
    mask = d.get("feature_mask")
    return TreeModel(
        nodes=[_node_from_dict(n) for n in d["nodes"]],
        n_features=n_features,
        hyperparams=hp,
        operator=operator,
        schema_version=schema,
        feature_mask=tuple(mask) if mask is not None else None,
    )


def model_to_dict(model: Model) -> dict:
    kind = model_kind(model)
    out = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "operator": model.operator,
        "schema_version": model.schema_version,
        "n_features": model.n_features,
    }
    if isinstance(model, Baseline1Model):
        out["conflict_rate"] = repr(float(model.p))
        return out
    out["hyperparams"] = model.hyperparams.to_dict()
    out["seed"] = model.hyperparams.seed
    if isinstance(model, ForestModel):
        out["bootstrap"] = model.bootstrap
        out["max_features"] = model.max_features
        out["trees"] = [_tree_to_dict(t) for t in model.trees]
    else:
        out["trees"] = [_tree_to_dict(model)]
    return out


def model_from_dict(d: dict) -> Model:
    if d.get("format") != FORMAT:
        raise SchemaError(f"not a model file (format={d.get('format')!r})")
    if d.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported model format version {d.get('format_version')!r}")
    kind = d["kind"]
    operator, schema, n_features = d["operator"], d["schema_version"], int(d["n_features"])
    if kind == "baseline1":
        return Baseline1Model(float(d["conflict_rate"]), n_features, operator, schema)
    hp = HyperParams.from_dict(d["hyperparams"])
    trees = [_tree_from_dict(t, n_features, hp, operator, schema) for t in d["trees"]]
    if kind == "rf":
        return ForestModel(
            trees, hp, n_features, operator, schema, bool(d["bootstrap"]), d.get("max_features")
        )
    if len(trees) != 1:
        raise SchemaError(f"{kind} model must hold exactly one tree")
    return trees[0]


def dumps(model: Model) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def loads(text: str) -> Model:
    return model_from_dict(json.loads(text))


def save_model(model: Model, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(model), encoding="utf-8")
    return path


def load_model(path: str | os.PathLike) -> Model:
    return loads(Path(path).read_text(encoding="utf-8"))
