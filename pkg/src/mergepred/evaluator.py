"""Per-class precision / recall / f1 and stratified k-fold cross-validation.

Both classes are scored separately, each in turn playing the target
("positive") role. Accuracy is intentionally not reported.
"""

from __future__ import annotations

import hashlib
import statistics
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .dataset import LabeledDataset
from .errors import FoldError, InputError, SchemaError
from .features import dimension
from .learner.spec import KIND_LABELS, Model, ModelSpec, fit_model, model_kind, predict_model

CLASS_NAMES = {1: "conflict", 0: "safe"}
_LABEL_CODES = {
    1: 1, "1": 1, "c": 1, "conflict": 1, "conflicting": 1, True: 1,
    0: 0, "0": 0, "s": 0, "safe": 0, "clean": 0, False: 0,
}


def label_code(label) -> int:
    key = label.lower() if isinstance(label, str) else label
    if isinstance(key, (np.integer,)):
        key = int(key)
    try:
        return _LABEL_CODES[key]
    except (KeyError, TypeError):
        raise InputError(f"unrecognised class label {label!r}") from None


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int
    target_class: str

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(truth: Sequence, pred: Sequence, target="C") -> ConfusionCounts:
    if len(truth) != len(pred):
        raise InputError(f"truth has {len(truth)} labels, prediction {len(pred)}")
    if len(truth) == 0:
        raise InputError("nothing to evaluate")
    t = np.array([label_code(v) for v in truth])
    p = np.array([label_code(v) for v in pred])
    pos = label_code(target)
    tp = int(np.sum((t == pos) & (p == pos)))
    fp = int(np.sum((t != pos) & (p == pos)))
    tn = int(np.sum((t != pos) & (p != pos)))
    fn = int(np.sum((t == pos) & (p != pos)))
    return ConfusionCounts(tp, fp, tn, fn, CLASS_NAMES[pos])


def prf(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Precision, recall, f1; any zero denominator yields 0 for that metric."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def zero_division_flags(counts: ConfusionCounts) -> list[str]:
    flags = []
    if counts.tp + counts.fp == 0:
        flags.append(f"precision_{counts.target_class}")
    if counts.tp + counts.fn == 0:
        flags.append(f"recall_{counts.target_class}")
    return flags


def class_metrics(truth, pred) -> dict[str, dict[str, float]]:
    out = {}
    for code, name in CLASS_NAMES.items():
        p, r, f = prf(confusion(truth, pred, code))
        out[name] = {"precision": p, "recall": r, "f1": f}
    return out


def stratified_folds(labels: Sequence, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Partition indices into ``k`` folds with per-class counts within one of
    proportional. Members of each class are shuffled, then dealt round-robin;
    the second class continues where the first stopped so fold sizes stay
    balanced too."""
    if k < 2:
        raise FoldError("need at least 2 folds")
    y = np.array([label_code(v) for v in labels])
    rng = np.random.default_rng(seed)
    buckets: list[list[int]] = [[] for _ in range(k)]
    position = 0
    for cls in (1, 0):
        members = np.flatnonzero(y == cls)
        if len(members) < k:
            raise FoldError(f"class {CLASS_NAMES[cls]!r} has {len(members)} samples, fewer than k={k}")
        for idx in rng.permutation(members):
            buckets[position % k].append(int(idx))
            position += 1
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def time_ordered_folds(timestamps: Sequence[int], k: int = 10) -> list[np.ndarray]:
    """Contiguous blocks in timestamp order (sensitivity analysis only)."""
    ts = np.asarray(timestamps)
    if len(ts) < k:
        raise FoldError(f"{len(ts)} samples cannot fill {k} folds")
    order = np.argsort(ts, kind="stable")
    return [np.sort(chunk) for chunk in np.array_split(order, k)]


def dataset_fingerprint(dataset: LabeledDataset) -> str:
    h = hashlib.sha256()
    for r in dataset.records:
        h.update(r.to_json().encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class EvaluationReport:
    classifier: str
    hyperparams: dict
    dataset: dict
    protocol: dict
    pooled: dict[str, dict[str, float]]
    confusion: dict[str, int]
    folds: list[dict] = field(default_factory=list)
    fold_mean: dict[str, dict[str, float]] = field(default_factory=dict)
    fold_sd: dict[str, dict[str, float]] = field(default_factory=dict)
    zero_division: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def label(self) -> str:
        return KIND_LABELS.get(self.classifier, self.classifier)


def _fold_summary(folds: list[dict]) -> tuple[dict, dict]:
    mean: dict[str, dict[str, float]] = {}
    sd: dict[str, dict[str, float]] = {}
    for cls in ("safe", "conflict"):
        mean[cls], sd[cls] = {}, {}
        for metric in ("precision", "recall", "f1"):
            vals = [f[cls][metric] for f in folds]
            mean[cls][metric] = statistics.fmean(vals)
            sd[cls][metric] = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return mean, sd


def _check_schema(model_operator: str, n_features: int, dataset: LabeledDataset) -> None:
    if model_operator and dataset.operator and model_operator != dataset.operator:
        raise SchemaError(f"model built for operator {model_operator!r}, dataset uses {dataset.operator!r}")
    if n_features != dimension(dataset.operator):
        raise SchemaError(f"model expects {n_features} features, dataset has {dimension(dataset.operator)}")


def _dataset_identity(dataset: LabeledDataset) -> dict:
    conflicts, cleans = dataset.class_counts
    return {
        "records": len(dataset),
        "conflicts": conflicts,
        "cleans": cleans,
        "operator": dataset.operator,
        "schema_version": dataset.schema_version,
        "sha256": dataset_fingerprint(dataset),
    }


def _assemble(kind, hp, dataset, protocol, y, pooled_pred, folds) -> EvaluationReport:
    flags: list[str] = []
    for code in (0, 1):
        flags += zero_division_flags(confusion(y, pooled_pred, code))
    target = confusion(y, pooled_pred, 1)
    mean, sd = _fold_summary(folds)
    return EvaluationReport(
        classifier=kind,
        hyperparams=hp,
        dataset=_dataset_identity(dataset),
        protocol=protocol,
        pooled=class_metrics(y, pooled_pred),
        confusion={"tp": target.tp, "fp": target.fp, "tn": target.tn, "fn": target.fn},
        folds=folds,
        fold_mean=mean,
        fold_sd=sd,
        zero_division=flags,
    )


def cross_validate(
    spec: ModelSpec,
    dataset: LabeledDataset,
    k: int = 10,
    seed: int = 0,
    chronological: bool = False,
    folds: list[np.ndarray] | None = None,
) -> EvaluationReport:
    """Train on k-1 folds, predict the held-out one, pool all predictions."""
    X, y = dataset.X, dataset.y
    if folds is None:
        folds = time_ordered_folds(dataset.timestamps, k) if chronological else stratified_folds(y, k, seed)
    pooled = np.full(len(y), -1, dtype=np.int64)
    fold_rows = []
    for i, test in enumerate(folds):
        train = np.setdiff1d(np.arange(len(y)), test, assume_unique=True)
        model = fit_model(spec, X[train], y[train])
        pred = predict_model(model, X[test], rng=np.random.default_rng([seed, i]))
        pooled[test] = pred
        row = {"fold": i, "n": int(len(test)), "conflicts": int(y[test].sum())}
        row.update(class_metrics(y[test], pred))
        fold_rows.append(row)
    if (pooled < 0).any():
        raise FoldError("folds do not cover the dataset")
    protocol = {
        "mode": "chronological" if chronological else "stratified",
        "k": len(folds),
        "seed": seed,
        "headline": "pooled",
    }
    hp = {} if spec.kind == "baseline1" else spec.hyperparams.to_dict()
    return _assemble(spec.kind, hp, dataset, protocol, y, pooled, fold_rows)


def evaluate_model(model: Model, dataset: LabeledDataset, seed: int = 0) -> EvaluationReport:
    """Score an already-trained model on ``dataset`` (held-out evaluation)."""
    _check_schema(model.operator, model.n_features, dataset)
    X, y = dataset.X, dataset.y
    if len(y) == 0:
        raise InputError("empty evaluation dataset")
    pred = predict_model(model, X, rng=np.random.default_rng([seed, 0]))
    row = {"fold": 0, "n": int(len(y)), "conflicts": int(y.sum())}
    row.update(class_metrics(y, pred))
    kind = model_kind(model)
    hp = {} if kind == "baseline1" else model.hyperparams.to_dict()
    protocol = {"mode": "held-out", "k": 1, "seed": seed, "headline": "pooled"}
    return _assemble(kind, hp, dataset, protocol, y, pred, [row])


def format_table(reports: Sequence[EvaluationReport], title: str = "") -> str:
    """Aligned text table: classifier x {Safe, Conflicting} x {P, R, f1}."""
    header = ["Classifier", "Precision_S", "Recall_S", "f1_S", "Precision_C", "Recall_C", "f1_C"]
    rows = [header]
    for rep in reports:
        s, c = rep.pooled["safe"], rep.pooled["conflict"]
        rows.append(
            [rep.label]
            + [f"{s[m]:.2f}" for m in ("precision", "recall", "f1")]
            + [f"{c[m]:.2f}" for m in ("precision", "recall", "f1")]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = [title] if title else []
    for j, r in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i]) for i, cell in enumerate(r)))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
