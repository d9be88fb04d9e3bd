"""Enumerate 3-way merge scenarios and label them by replaying the merge."""

from __future__ import annotations

import logging
import queue
import shutil
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterator

from .catalog import LocalRepo
from .errors import PreconditionError
from .git_gateway import run_git
from .locks import FileLock

log = logging.getLogger(__name__)

CONFLICT_PHRASE = "Automatic merge failed; fix conflicts and then commit the result"
DEFAULT_LIMIT = 1000

# identity for merge commits created during replay; never persisted anywhere
_REPLAY_IDENTITY = [
    "-c", "user.name=mergepred-replay",
    "-c", "user.email=replay@mergepred.invalid",
    "-c", "commit.gpgsign=false",
    "-c", "core.hooksPath=/dev/null",
    "-c", "rerere.enabled=false",
]


class Outcome(str, Enum):
    CONFLICT = "Conflict"
    CLEAN = "Clean"
    REPLAY_ERROR = "ReplayError"


@dataclass(frozen=True)
class MergeScenario:
    repo: str
    merge_commit: str
    parent1: str
    parent2: str
    ancestor: str
    merge_timestamp: int
    multi_base: bool = False

    @property
    def key(self) -> str:
        return f"{self.repo}@{self.merge_commit}"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MergeLabel:
    outcome: Outcome
    conflicting_paths: tuple[str, ...] = ()
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "conflicting_paths": list(self.conflicting_paths),
            "detail": self.detail,
        }


@dataclass
class MiningSummary:
    merges_found: int = 0
    octopus_skipped: int = 0
    no_base_skipped: int = 0
    replay_errors: int = 0
    conflicts: int = 0
    cleans: int = 0

    def add(self, other: "MiningSummary") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def record(self, label: MergeLabel) -> None:
        if label.outcome is Outcome.CONFLICT:
            self.conflicts += 1
        elif label.outcome is Outcome.CLEAN:
            self.cleans += 1
        else:
            self.replay_errors += 1

    def to_dict(self) -> dict:
        return asdict(self)


def merge_bases(repo_path: Path, p1: str, p2: str) -> list[str]:
    res = run_git(repo_path, ["merge-base", "--all", p1, p2])
    if not res.ok:
        return []
    return res.text.split()


def find_ancestor(repo: LocalRepo | Path, p1: str, p2: str) -> str | None:
    """Merge base of ``p1`` and ``p2``; git's first base when there are several."""
    path = repo.path if isinstance(repo, LocalRepo) else Path(repo)
    bases = merge_bases(path, p1, p2)
    return bases[0] if bases else None


@dataclass
class Enumeration:
    scenarios: list[MergeScenario]
    summary: MiningSummary = field(default_factory=MiningSummary)


def enumerate_merges(repo: LocalRepo, limit: int = DEFAULT_LIMIT, rev: str = "HEAD") -> Enumeration:
    """Newest-first (topological) 2-parent merges reachable from ``rev``.

    Octopus merges and merges without a common ancestor are skipped and
    counted in the returned summary.
    """
    if limit < 1:
        raise ValueError("limit must be >= 1")
    res = run_git(repo.path, ["log", "--merges", "--topo-order", "--format=%H %at %P", rev])
    if not res.ok:
        raise PreconditionError(f"cannot list merges in {repo.path}: {res.err_text.strip()}")
    out = Enumeration([])
    for line in res.text.splitlines():
        if len(out.scenarios) >= limit:
            break
        parts = line.split()
        commit, ts, parents = parts[0], int(parts[1]), parts[2:]
        out.summary.merges_found += 1
        if len(parents) != 2:
            out.summary.octopus_skipped += 1
            continue
        bases = merge_bases(repo.path, parents[0], parents[1])
        if not bases:
            log.info("%s: no common ancestor for merge %s, skipped", repo.spec.name, commit)
            out.summary.no_base_skipped += 1
            continue
        scenario = MergeScenario(
            repo=repo.spec.name,
            merge_commit=commit,
            parent1=parents[0],
            parent2=parents[1],
            ancestor=bases[0],
            merge_timestamp=ts,
            multi_base=len(bases) > 1,
        )
        assert len(parents) == 2
        out.scenarios.append(scenario)
    return out


def _status_clean(worktree: Path) -> bool:
    res = run_git(worktree, ["status", "--porcelain", "--untracked-files=all"])
    return res.ok and not res.stdout.strip()


def _head(worktree: Path) -> str:
    return run_git(worktree, ["rev-parse", "HEAD"]).text.strip()


def _unmerged_paths(worktree: Path) -> list[str]:
    res = run_git(worktree, ["diff", "--name-only", "--diff-filter=U", "-z"])
    return sorted({p for p in res.text.split("\0") if p})


def _restore(worktree: Path, head: str) -> None:
    run_git(worktree, ["merge", "--abort"])
    run_git(worktree, ["reset", "--hard", "-q"])
    run_git(worktree, ["checkout", "-q", "--detach", head])
    run_git(worktree, ["clean", "-fdxq"])
    if not _status_clean(worktree) or _head(worktree) != head:
        raise EnvironmentError(f"could not restore worktree {worktree} to {head}")


def replay(worktree: Path, scenario: MergeScenario) -> MergeLabel:
    """Re-run the merge of ``scenario`` in ``worktree`` and classify the result.

    The caller must own ``worktree`` exclusively. It is left at the HEAD it
    had on entry with an empty status.
    """
    worktree = Path(worktree)
    if not _status_clean(worktree):
        raise PreconditionError(f"worktree {worktree} is dirty")
    entry_head = _head(worktree)
    try:
        co = run_git(worktree, ["checkout", "-q", "--detach", scenario.parent1])
        if not co.ok:
            return MergeLabel(Outcome.REPLAY_ERROR, (), f"checkout failed: {co.err_text.strip()}")
        merge = run_git(worktree, [*_REPLAY_IDENTITY, "merge", "--no-edit", scenario.parent2])
        if merge.ok:
            return MergeLabel(Outcome.CLEAN, (), "merged cleanly")
        unmerged = _unmerged_paths(worktree)
        phrase = CONFLICT_PHRASE in merge.text or CONFLICT_PHRASE in merge.err_text
        if unmerged or phrase:
            notes = []
            if unmerged and not phrase:
                notes.append("conflict phrase missing")
                log.warning("%s: detectors disagree (unmerged paths, no phrase)", scenario.key)
            if phrase and not unmerged:
                notes.append("phrase without unmerged paths")
                log.warning("%s: detectors disagree (phrase, no unmerged paths)", scenario.key)
            detail = "conflict" + (f" ({'; '.join(notes)})" if notes else "")
            return MergeLabel(Outcome.CONFLICT, tuple(unmerged), detail)
        msg = (merge.err_text or merge.text).strip().splitlines()
        return MergeLabel(
            Outcome.REPLAY_ERROR, (), f"merge exited {merge.exit_code}: {msg[-1] if msg else ''}"
        )
    finally:
        _restore(worktree, entry_head)


class WorktreePool:
    """A fixed set of linked worktrees for one repository.

    Each worktree is handed to at most one replay at a time; a per-worktree
    ``flock`` additionally guards against other processes.
    """

    def __init__(self, repo: LocalRepo, root: Path, size: int = 1):
        self.repo = repo
        self.root = Path(root).resolve()
        self.paths: list[Path] = []
        self._free: queue.Queue[Path] = queue.Queue()
        for i in range(max(1, size)):
            path = self.root / f"w{i}"
            self._ensure(path)
            self.paths.append(path)
            self._free.put(path)

    def _ensure(self, path: Path) -> None:
        if path.exists() and (path / ".git").exists() and _status_clean(path):
            return
        if path.exists():
            shutil.rmtree(path)
        run_git(self.repo.path, ["worktree", "prune"])
        path.parent.mkdir(parents=True, exist_ok=True)
        res = run_git(self.repo.path, ["worktree", "add", "-q", "--detach", str(path), "HEAD"])
        if not res.ok:
            raise EnvironmentError(f"cannot create worktree {path}: {res.err_text.strip()}")

    @contextmanager
    def lease(self) -> Iterator[Path]:
        path = self._free.get()
        try:
            with FileLock(path.parent / f".{path.name}.lock"):
                yield path
        finally:
            self._free.put(path)

    def close(self) -> None:
        for path in self.paths:
            run_git(self.repo.path, ["worktree", "remove", "--force", str(path)])
        run_git(self.repo.path, ["worktree", "prune"])
        shutil.rmtree(self.root, ignore_errors=True)

    def __enter__(self) -> "WorktreePool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
