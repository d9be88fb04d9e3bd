"""JSON-lines persistence for labeled feature records.

Layout of a dataset directory::

    dataset.jsonl       one record per line, append-only
    dataset.meta.json   schema version, operator, git version, mining summary
    dataset.csv         optional export, header = feature-schema names

Floats are written with ``repr`` precision so a load reproduces every value
bit for bit.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import LoadError, SchemaError
from .features import FeatureVector, dimension, feature_names, normalize_operator, schema_version
from .locks import FileLock

RECORDS_FILE = "dataset.jsonl"
META_FILE = "dataset.meta.json"
CSV_FILE = "dataset.csv"
LABELS = ("conflict", "clean")


@dataclass(frozen=True)
class DatasetRecord:
    repo: str
    merge_commit: str
    language: str
    features: tuple[float, ...]
    label: str
    operator: str
    schema_version: str
    git_version: str = ""
    merge_timestamp: int = 0

    @property
    def key(self) -> str:
        return f"{self.repo}@{self.merge_commit}"

    @property
    def is_conflict(self) -> bool:
        return self.label == "conflict"

    def to_json(self) -> str:
        obj = {
            "key": self.key,
            "repo": self.repo,
            "merge_commit": self.merge_commit,
            "merge_timestamp": self.merge_timestamp,
            "language": self.language,
            "label": self.label,
            "features": [float(v) for v in self.features],
            "meta": {
                "operator": self.operator,
                "schema_version": self.schema_version,
                "git_version": self.git_version,
            },
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)

    @classmethod
    def from_json(cls, line: str) -> "DatasetRecord":
        obj = json.loads(line)
        meta = obj["meta"]
        return cls(
            repo=obj["repo"],
            merge_commit=obj["merge_commit"],
            language=obj["language"],
            features=tuple(float(v) for v in obj["features"]),
            label=obj["label"],
            operator=meta["operator"],
            schema_version=meta["schema_version"],
            git_version=meta.get("git_version", ""),
            merge_timestamp=int(obj.get("merge_timestamp", 0)),
        )

    @classmethod
    def from_vector(
        cls,
        vec: FeatureVector,
        language: str,
        git_version: str = "",
        merge_timestamp: int = 0,
    ) -> "DatasetRecord":
        if vec.label is None:
            raise SchemaError(f"{vec.repo}@{vec.merge_commit} has no label")
        return cls(
            repo=vec.repo,
            merge_commit=vec.merge_commit,
            language=language,
            features=tuple(vec.values),
            label=vec.label,
            operator=vec.operator,
            schema_version=schema_version(),
            git_version=git_version,
            merge_timestamp=merge_timestamp,
        )


def validate(record: DatasetRecord, operator: str | None = None) -> None:
    op = normalize_operator(record.operator)
    if operator is not None and normalize_operator(operator) != op:
        raise SchemaError(f"record operator {op!r} does not match sink operator {operator!r}")
    want = dimension(op)
    if len(record.features) != want:
        raise SchemaError(f"{record.key}: {len(record.features)} features, schema {op!r} needs {want}")
    if record.label not in LABELS:
        raise SchemaError(f"{record.key}: label must be one of {LABELS}, got {record.label!r}")
    if record.schema_version != schema_version():
        raise SchemaError(f"{record.key}: schema version {record.schema_version!r} != {schema_version()!r}")
    if not all(np.isfinite(record.features)):
        raise SchemaError(f"{record.key}: non-finite feature value")


class DatasetWriter:
    """Exclusive appender for ``dataset.jsonl``.

    Holding the writer takes a lock file; a second writer on the same
    directory gets :class:`LockError`. Records whose key is already present
    are skipped, which makes re-mining idempotent.
    """

    def __init__(self, directory: str | os.PathLike, operator: str):
        self.directory = Path(directory)
        self.operator = normalize_operator(operator)
        self.path = self.directory / RECORDS_FILE
        self._lock = FileLock(self.directory / ".dataset.lock")
        self._keys: set[str] = set()
        self._fh = None

    def open(self) -> "DatasetWriter":
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock.acquire()
        try:
            if self.path.exists():
                for rec in iter_records(self.path):
                    if normalize_operator(rec.operator) != self.operator:
                        raise SchemaError(
                            f"{self.path} holds {rec.operator!r} records; cannot append {self.operator!r}"
                        )
                    self._keys.add(rec.key)
            self._fh = open(self.path, "a", encoding="utf-8")
        except BaseException:
            self._lock.release()
            raise
        return self

    def append(self, record: DatasetRecord) -> bool:
        """Write one record durably; returns False when the key already exists."""
        if self._fh is None:
            raise RuntimeError("writer is not open")
        validate(record, self.operator)
        if record.key in self._keys:
            return False
        self._fh.write(record.to_json() + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._keys.add(record.key)
        return True

    def __len__(self) -> int:
        return len(self._keys)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
        self._lock.release()

    def __enter__(self) -> "DatasetWriter":
        return self.open()

    def __exit__(self, *exc) -> None:
        self.close()


def append_record(sink: DatasetWriter, record: DatasetRecord) -> bool:
    return sink.append(record)


def _records_path(path: str | os.PathLike) -> Path:
    p = Path(path)
    return p / RECORDS_FILE if p.is_dir() else p


def iter_records(path: str | os.PathLike) -> Iterator[DatasetRecord]:
    p = _records_path(path)
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield DatasetRecord.from_json(line)
            except (ValueError, KeyError, TypeError) as exc:
                raise LoadError(f"corrupt record in {p}: {exc}", lineno) from exc


@dataclass
class LabeledDataset:
    records: list[DatasetRecord]
    schema_version: str
    operator: str
    source: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def class_counts(self) -> tuple[int, int]:
        conflicts = sum(1 for r in self.records if r.is_conflict)
        return conflicts, len(self.records) - conflicts

    @property
    def imbalance_rate(self) -> float | None:
        if not self.records:
            return None
        return self.class_counts[0] / len(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def X(self) -> np.ndarray:
        d = dimension(self.operator)
        if not self.records:
            return np.zeros((0, d))
        return np.array([r.features for r in self.records], dtype=np.float64)

    @property
    def y(self) -> np.ndarray:
        return np.array([1 if r.is_conflict else 0 for r in self.records], dtype=np.int64)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.merge_timestamp for r in self.records], dtype=np.int64)

    @property
    def feature_names(self) -> list[str]:
        return feature_names(self.operator)

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        return LabeledDataset(
            [self.records[i] for i in indices], self.schema_version, self.operator, self.source, self.meta
        )


def load_dataset(path: str | os.PathLike, language_filter: str | None = None) -> LabeledDataset:
    p = _records_path(path)
    if not p.exists():
        raise FileNotFoundError(p)
    records = list(iter_records(p))
    operators = {normalize_operator(r.operator) for r in records}
    if len(operators) > 1:
        raise LoadError(f"{p} mixes operators {sorted(operators)}")
    versions = {r.schema_version for r in records}
    if len(versions) > 1:
        raise LoadError(f"{p} mixes schema versions {sorted(versions)}")
    meta_path = p.parent / META_FILE
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    operator = operators.pop() if operators else normalize_operator(meta.get("operator", "norm1"))
    if language_filter is not None:
        records = [r for r in records if r.language == language_filter]
    return LabeledDataset(
        records,
        versions.pop() if versions else meta.get("schema_version", schema_version()),
        operator,
        str(p),
        meta,
    )


def write_meta(directory: str | os.PathLike, meta: dict) -> Path:
    path = Path(directory) / META_FILE
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def export_csv(dataset: LabeledDataset, path: str | os.PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key", "language", *feature_names(dataset.operator), "label"])
        for r in dataset.records:
            w.writerow([r.key, r.language, *(repr(v) for v in r.features), r.label])
    return path
