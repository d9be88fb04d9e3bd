"""Git-history features of a merge scenario.

One merge-level count (files changed on both sides) plus 27 branch-level
values per side, combined into a single vector by an operator. The frozen
order lives in ``feature-schema.json`` next to this module.
"""

from __future__ import annotations

import json
import math
import re
import statistics
from dataclasses import dataclass, field, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .catalog import LocalRepo
from .errors import ConfigError, ExtractionError, RangeError
from .git_gateway import LOG_FORMAT, ChangeKind, CommitMeta, FileChange, parse_changes, parse_log_records, run_git
from .miner import MergeLabel, MergeScenario, Outcome

KEYWORDS = (
    "fix", "bug", "feature", "improve", "document", "refactor",
    "update", "add", "remove", "use", "delete", "change",
)
WEEK_SECONDS = 7 * 24 * 3600
BRANCH_DIM = 27
FS1_INDEX = 0

OPERATORS = ("min", "max", "avg", "median", "norm1", "norm2", "concat")
DEFAULT_OPERATOR = "norm1"
_OPERATOR_ALIASES = {
    "minimum": "min", "maximum": "max", "average": "avg", "mean": "avg",
    "norm-1": "norm1", "l1": "norm1", "norm-2": "norm2", "l2": "norm2",
    "concatenation": "concat",
}

_TOKEN_RE = re.compile(r"[^\W_]+")


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("mergepred").joinpath("feature-schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def schema_version() -> str:
    return load_schema()["schema_version"]


def normalize_operator(tag: str) -> str:
    key = tag.strip().lower()
    key = _OPERATOR_ALIASES.get(key, key)
    if key not in OPERATORS:
        raise ConfigError(f"unknown combination operator {tag!r}; expected one of {OPERATORS}")
    return key


def dimension(operator: str) -> int:
    op = normalize_operator(operator)
    return 1 + (2 * BRANCH_DIM if op == "concat" else BRANCH_DIM)


def feature_names(operator: str = DEFAULT_OPERATOR) -> list[str]:
    schema = load_schema()
    branch = [f["name"] for f in schema["branch_level"]]
    head = [f["name"] for f in schema["merge_level"]]
    if normalize_operator(operator) == "concat":
        return head + [f"{n}_p1" for n in branch] + [f"{n}_p2" for n in branch]
    return head + branch


def feature_set_ids(operator: str = DEFAULT_OPERATOR) -> list[int]:
    """Feature-set number (1..9) of every column, in vector order."""
    schema = load_schema()
    branch = [f["feature_set"] for f in schema["branch_level"]]
    head = [f["feature_set"] for f in schema["merge_level"]]
    if normalize_operator(operator) == "concat":
        return head + branch + branch
    return head + branch


@dataclass(frozen=True)
class BranchFeatures:
    commit_count: int = 0
    commit_density_last_week: int = 0
    files_added: int = 0
    files_deleted: int = 0
    files_renamed: int = 0
    files_modified: int = 0
    files_copied: int = 0
    lines_added: int = 0
    lines_deleted: int = 0
    active_developers: int = 0
    keyword_freqs: tuple[int, ...] = (0,) * len(KEYWORDS)
    msg_len_min: float = 0
    msg_len_max: float = 0
    msg_len_mean: float = 0
    msg_len_median: float = 0
    duration_hours: float = 0.0

    def as_vector(self) -> list[float]:
        vals: list[float] = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                vals.extend(float(x) for x in v)
            else:
                vals.append(float(v))
        assert len(vals) == BRANCH_DIM
        return vals


@dataclass(frozen=True)
class FeatureVector:
    repo: str
    merge_commit: str
    simultaneous_files: int
    combined: tuple[float, ...]
    operator: str
    label: str | None = None
    branch1: BranchFeatures | None = field(default=None, compare=False, repr=False)
    branch2: BranchFeatures | None = field(default=None, compare=False, repr=False)

    @property
    def values(self) -> list[float]:
        return [float(self.simultaneous_files), *self.combined]

    def __len__(self) -> int:
        return 1 + len(self.combined)


# ---------------------------------------------------------------------------
# pure computations


def simultaneous_changes(files1: Iterable[str], files2: Iterable[str]) -> int:
    return len(set(files1) & set(files2))


def keyword_frequencies(messages: Sequence[str], keywords: Sequence[str] = KEYWORDS) -> list[int]:
    """Count tokens that start with each keyword, case-insensitively.

    A token is a maximal run of letters/digits, so "Fixed" counts for "fix"
    and "bugs" for "bug". Keywords are counted independently of each other.
    """
    counts = [0] * len(keywords)
    for msg in messages:
        for token in _TOKEN_RE.findall(msg.lower()):
            for i, kw in enumerate(keywords):
                if token.startswith(kw):
                    counts[i] += 1
    return counts


def message_length_stats(messages: Sequence[str]) -> tuple[float, float, float, float]:
    if not messages:
        return (0, 0, 0, 0)
    lengths = [len(m) for m in messages]
    return (min(lengths), max(lengths), statistics.fmean(lengths), statistics.median(lengths))


def combine(a: Sequence[float], b: Sequence[float], operator: str) -> list[float]:
    op = normalize_operator(operator)
    if len(a) != len(b):
        raise ValueError(f"branch vectors differ in length: {len(a)} vs {len(b)}")
    if op == "concat":
        return [float(x) for x in a] + [float(y) for y in b]
    fn = {
        "min": min,
        "max": max,
        "avg": lambda x, y: (x + y) / 2,
        "median": lambda x, y: (x + y) / 2,
        "norm1": lambda x, y: abs(x) + abs(y),
        "norm2": math.hypot,
    }[op]
    return [float(fn(x, y)) for x, y in zip(a, b)]


# ---------------------------------------------------------------------------
# git-backed extraction


@dataclass
class RangeData:
    """Everything git reports about ``ancestor..tip`` (three git calls)."""

    ancestor: str
    tip: str
    commits: list[CommitMeta]
    changes: list[FileChange]
    ancestor_time: int
    tip_time: int

    @property
    def empty(self) -> bool:
        return self.ancestor == self.tip


def _repo_path(repo: LocalRepo | Path | str) -> Path:
    return repo.path if isinstance(repo, LocalRepo) else Path(repo)


def resolve(repo: LocalRepo | Path | str, rev: str) -> str:
    res = run_git(_repo_path(repo), ["rev-parse", "--verify", "-q", f"{rev}^{{commit}}"])
    if not res.ok:
        raise RangeError(f"revision {rev!r} does not resolve")
    return res.text.strip()


def _author_times(path: Path, revs: Sequence[str]) -> list[int]:
    res = run_git(path, ["show", "-s", "--format=%at", *revs])
    if not res.ok:
        raise RangeError(f"cannot read timestamps of {list(revs)}: {res.err_text.strip()}")
    return [int(x) for x in res.text.split()]


def _check_ancestry(path: Path, ancestor: str, tip: str) -> None:
    res = run_git(path, ["merge-base", "--is-ancestor", ancestor, tip])
    if res.exit_code == 1:
        raise RangeError(f"{ancestor[:12]} is not an ancestor of {tip[:12]}")
    if not res.ok:
        raise RangeError(f"invalid range {ancestor}..{tip}: {res.err_text.strip()}")


def range_data(repo: LocalRepo | Path | str, ancestor: str, tip: str, check: bool = True) -> RangeData:
    path = _repo_path(repo)
    ancestor = resolve(path, ancestor)
    tip = resolve(path, tip)
    if ancestor == tip:
        t = _author_times(path, [tip])[0]
        return RangeData(ancestor, tip, [], [], t, t)
    if check:
        _check_ancestry(path, ancestor, tip)
    lg = run_git(path, ["log", "-z", f"--format={LOG_FORMAT}", f"{ancestor}..{tip}"])
    if not lg.ok:
        raise RangeError(lg.err_text.strip())
    numstat = run_git(path, ["diff", "-z", "--numstat", "-M", "-C", ancestor, tip])
    names = run_git(path, ["diff", "-z", "--name-status", "-M", "-C", ancestor, tip])
    if not (numstat.ok and names.ok):
        raise RangeError((numstat.err_text or names.err_text).strip())
    t_anc, t_tip = _author_times(path, [ancestor, tip])
    return RangeData(
        ancestor, tip, parse_log_records(lg.stdout), parse_changes(numstat.stdout, names.stdout), t_anc, t_tip
    )


def paths_of(data: RangeData) -> set[str]:
    paths: set[str] = set()
    for ch in data.changes:
        paths.add(ch.path)
        if ch.kind is ChangeKind.RENAMED and ch.old_path:
            paths.add(ch.old_path)
    return paths


def density_of(data: RangeData) -> int:
    lo = data.tip_time - WEEK_SECONDS
    return sum(1 for c in data.commits if lo <= c.author_timestamp <= data.tip_time)


def histogram_of(data: RangeData) -> tuple[int, int, int, int, int]:
    """(added, deleted, renamed, modified, copied) file counts."""
    order = (ChangeKind.ADDED, ChangeKind.DELETED, ChangeKind.RENAMED, ChangeKind.MODIFIED, ChangeKind.COPIED)
    counts = {k: 0 for k in order}
    for ch in data.changes:
        counts[ch.kind] += 1
    return tuple(counts[k] for k in order)  # type: ignore[return-value]


def churn_of(data: RangeData) -> tuple[int, int]:
    added = sum(ch.lines_added or 0 for ch in data.changes)
    deleted = sum(ch.lines_deleted or 0 for ch in data.changes)
    return added, deleted


def developers_of(data: RangeData) -> int:
    return len({c.author_email.strip().lower() for c in data.commits})


def duration_of(data: RangeData) -> float:
    if data.empty:
        return 0.0
    return max(0.0, (data.tip_time - data.ancestor_time) / 3600.0)


def branch_features_of(data: RangeData) -> BranchFeatures:
    if data.empty or not data.commits:
        return BranchFeatures()
    messages = [c.message for c in data.commits]
    added, deleted, renamed, modified, copied = histogram_of(data)
    lines_added, lines_deleted = churn_of(data)
    lo, hi, mean, median = message_length_stats(messages)
    return BranchFeatures(
        commit_count=len(data.commits),
        commit_density_last_week=density_of(data),
        files_added=added,
        files_deleted=deleted,
        files_renamed=renamed,
        files_modified=modified,
        files_copied=copied,
        lines_added=lines_added,
        lines_deleted=lines_deleted,
        active_developers=developers_of(data),
        keyword_freqs=tuple(keyword_frequencies(messages)),
        msg_len_min=lo,
        msg_len_max=hi,
        msg_len_mean=mean,
        msg_len_median=median,
        duration_hours=duration_of(data),
    )


def changed_files(repo, ancestor: str, tip: str) -> set[str]:
    return paths_of(range_data(repo, ancestor, tip))


def branch_commit_count(repo, ancestor: str, tip: str) -> int:
    return len(range_data(repo, ancestor, tip).commits)


def commit_density(repo, ancestor: str, tip: str) -> int:
    return density_of(range_data(repo, ancestor, tip))


def file_change_histogram(repo, ancestor: str, tip: str) -> tuple[int, int, int, int, int]:
    return histogram_of(range_data(repo, ancestor, tip))


def line_churn(repo, ancestor: str, tip: str) -> tuple[int, int]:
    return churn_of(range_data(repo, ancestor, tip))


def active_devs(repo, ancestor: str, tip: str) -> int:
    return developers_of(range_data(repo, ancestor, tip))


def branch_duration_hours(repo, ancestor: str, tip: str) -> float:
    return duration_of(range_data(repo, ancestor, tip))


def branch_features(repo, ancestor: str, tip: str) -> BranchFeatures:
    return branch_features_of(range_data(repo, ancestor, tip))


_LABEL_NAMES = {Outcome.CONFLICT: "conflict", Outcome.CLEAN: "clean"}


def extract_feature_vector(
    repo: LocalRepo | Path | str,
    scenario: MergeScenario,
    operator: str = DEFAULT_OPERATOR,
    label: MergeLabel | None = None,
) -> FeatureVector:
    op = normalize_operator(operator)
    ranges = []
    for side, tip in (("parent1", scenario.parent1), ("parent2", scenario.parent2)):
        try:
            ranges.append(range_data(repo, scenario.ancestor, tip))
        except RangeError as exc:
            raise ExtractionError(f"branch range ({side})", exc) from exc
    d1, d2 = ranges
    fs1 = simultaneous_changes(paths_of(d1), paths_of(d2))
    b1, b2 = branch_features_of(d1), branch_features_of(d2)
    combined = combine(b1.as_vector(), b2.as_vector(), op)
    tag = _LABEL_NAMES.get(label.outcome) if label is not None else None
    return FeatureVector(
        repo=scenario.repo,
        merge_commit=scenario.merge_commit,
        simultaneous_files=fs1,
        combined=tuple(combined),
        operator=op,
        label=tag,
        branch1=b1,
        branch2=b2,
    )
