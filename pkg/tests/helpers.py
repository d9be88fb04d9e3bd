"""In-memory datasets for learner, evaluator, and analytics tests."""

from __future__ import annotations

import numpy as np

from mergepred.dataset import DatasetRecord, LabeledDataset
from mergepred.features import schema_version


def make_record(i: int, features, conflict: bool, operator: str = "norm1", repo: str = "synthetic/repo") -> DatasetRecord:
    return DatasetRecord(
        repo=repo,
        merge_commit=f"{i:040x}",
        language="Java",
        features=tuple(float(v) for v in features),
        label="conflict" if conflict else "clean",
        operator=operator,
        schema_version=schema_version(),
        merge_timestamp=1_600_000_000 + i,
    )


def make_dataset(X, y, operator: str = "norm1") -> LabeledDataset:
    X = np.asarray(X, dtype=np.float64)
    recs = [make_record(i, row, bool(lbl), operator) for i, (row, lbl) in enumerate(zip(X, y))]
    return LabeledDataset(recs, schema_version(), operator)


def fs1_informative(n: int = 400, seed: int = 0, rate: float = 0.15):
    """28-column data where only column 0 (simultaneously changed files) carries the label."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < rate).astype(int)
    X = rng.poisson(3.0, size=(n, 28)).astype(float)
    X[:, 0] = np.where(y == 1, rng.integers(3, 9, n), rng.integers(0, 3, n))
    return X, y
