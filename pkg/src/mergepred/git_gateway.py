"""Thin wrapper around the ``git`` executable.

Every other module talks to git through :func:`run_git` and the parsers in
this file; nothing else spawns processes. Output is kept as bytes and only
decoded (utf-8 with ``surrogateescape``) when parsed, so odd path encodings
survive a round trip.

Log records are requested with :data:`LOG_FORMAT` under ``-z``: each commit
becomes five NUL-terminated fields (hash, space-separated parents, author
email, author unix time, raw message). Messages may contain newlines; they can
not contain NUL, which makes the stream unambiguous.
"""

from __future__ import annotations

import logging
import os
import re
import shutil
import subprocess
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .errors import GitTimeoutError, ParseError

log = logging.getLogger(__name__)

LOG_FORMAT = "%H%x00%P%x00%ae%x00%at%x00%B"
LOG_FIELDS = 5
MIN_GIT_VERSION = (2, 25)

_HASH_RE = re.compile(r"^[0-9a-f]{40}$")
_ENCODING = "utf-8"

# fixed locale keeps porcelain phrases stable; no pager, no prompts
_GIT_ENV = {
    "LC_ALL": "C",
    "LANG": "C",
    "GIT_TERMINAL_PROMPT": "0",
    "GIT_PAGER": "cat",
    "GIT_CONFIG_NOSYSTEM": "1",
}


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    stdout: bytes
    stderr: bytes
    duration_ms: float

    @property
    def ok(self) -> bool:
        return self.exit_code == 0

    @property
    def text(self) -> str:
        return decode(self.stdout)

    @property
    def err_text(self) -> str:
        return decode(self.stderr)


@dataclass(frozen=True)
class CommitMeta:
    id: str
    parent_ids: tuple[str, ...]
    author_email: str
    author_timestamp: int
    message: str


class ChangeKind(str, Enum):
    ADDED = "Added"
    DELETED = "Deleted"
    MODIFIED = "Modified"
    RENAMED = "Renamed"
    COPIED = "Copied"


@dataclass(frozen=True)
class FileChange:
    kind: ChangeKind
    path: str
    lines_added: int | None
    lines_deleted: int | None
    old_path: str | None = None


def decode(raw: bytes) -> str:
    return raw.decode(_ENCODING, errors="surrogateescape")


def git_executable() -> str:
    exe = shutil.which("git")
    if exe is None:
        raise EnvironmentError("git executable not found on PATH")
    return exe


def run_git(
    repo_path: str | os.PathLike | None,
    args: Sequence[str],
    timeout: float = 120,
    env: dict[str, str] | None = None,
) -> CommandResult:
    """Run ``git <args>`` inside ``repo_path`` and capture everything.

    A nonzero exit status is returned, not raised. Only a missing executable
    (``EnvironmentError``) or an exceeded deadline (:class:`GitTimeoutError`,
    a ``TimeoutError``) raise.
    """
    cmd = [git_executable(), *args]
    full_env = {**os.environ, **_GIT_ENV, **(env or {})}
    start = time.perf_counter()
    try:
        proc = subprocess.run(
            cmd,
            cwd=os.fspath(repo_path) if repo_path is not None else None,
            stdin=subprocess.DEVNULL,
            capture_output=True,
            timeout=timeout,
            env=full_env,
        )
    except subprocess.TimeoutExpired as exc:
        raise GitTimeoutError(args, timeout, exc.stdout or b"", exc.stderr or b"") from exc
    except FileNotFoundError as exc:
        if repo_path is not None and not Path(repo_path).exists():
            raise FileNotFoundError(f"repository path does not exist: {repo_path}") from exc
        raise EnvironmentError(f"cannot execute git: {exc}") from exc
    elapsed = (time.perf_counter() - start) * 1000.0
    return CommandResult(proc.returncode, proc.stdout, proc.stderr, elapsed)


def git_version() -> str:
    res = run_git(None, ["--version"], timeout=30)
    return res.text.strip().removeprefix("git version ").strip()


def check_git_version() -> str:
    version = git_version()
    nums = tuple(int(p) for p in re.findall(r"\d+", version)[:2])
    if nums < MIN_GIT_VERSION:
        raise EnvironmentError(
            f"git {version} is too old; need >= {'.'.join(map(str, MIN_GIT_VERSION))}"
        )
    log.info("using git %s", version)
    return version


def parse_log_records(output: bytes | str) -> list[CommitMeta]:
    """Parse ``git log -z --format=LOG_FORMAT`` output into commit records."""
    raw = output.encode(_ENCODING, errors="surrogateescape") if isinstance(output, str) else output
    if not raw:
        return []
    fields = raw.split(b"\0")
    # the stream ends with a terminator, leaving one empty trailing chunk
    if fields[-1] == b"":
        fields.pop()
    if len(fields) % LOG_FIELDS:
        # locate the start of the incomplete record for the message
        offset = sum(len(f) + 1 for f in fields[: len(fields) - len(fields) % LOG_FIELDS])
        raise ParseError("truncated log record", offset)

    records: list[CommitMeta] = []
    offset = 0
    for i in range(0, len(fields), LOG_FIELDS):
        chunk = fields[i : i + LOG_FIELDS]
        commit_id = decode(chunk[0]).strip()
        if not _HASH_RE.match(commit_id):
            raise ParseError(f"bad commit hash {commit_id!r}", offset)
        parents = tuple(decode(chunk[1]).split())
        for p in parents:
            if not _HASH_RE.match(p):
                raise ParseError(f"bad parent hash {p!r}", offset)
        try:
            ts = int(decode(chunk[3]))
        except ValueError:
            raise ParseError(f"bad author timestamp {chunk[3]!r}", offset) from None
        records.append(
            CommitMeta(
                id=commit_id,
                parent_ids=parents,
                author_email=decode(chunk[2]),
                author_timestamp=ts,
                message=decode(chunk[4]).rstrip("\n"),
            )
        )
        offset += sum(len(f) + 1 for f in chunk)
    return records


def _status_kind(status: str) -> ChangeKind:
    letter = status[:1]
    try:
        return {
            "A": ChangeKind.ADDED,
            "D": ChangeKind.DELETED,
            "M": ChangeKind.MODIFIED,
            "T": ChangeKind.MODIFIED,
            "R": ChangeKind.RENAMED,
            "C": ChangeKind.COPIED,
        }[letter]
    except KeyError:
        raise ParseError(f"unsupported status letter {status!r}") from None


def _parse_name_status(out: str) -> list[tuple[ChangeKind, str, str | None]]:
    entries: list[tuple[ChangeKind, str, str | None]] = []
    if "\0" in out:
        tokens = out.split("\0")
        if tokens and tokens[-1] == "":
            tokens.pop()
        i = 0
        while i < len(tokens):
            status = tokens[i].strip()
            kind = _status_kind(status)
            if kind in (ChangeKind.RENAMED, ChangeKind.COPIED):
                if i + 2 >= len(tokens):
                    raise ParseError("truncated rename entry in name-status output")
                entries.append((kind, tokens[i + 2], tokens[i + 1]))
                i += 3
            else:
                if i + 1 >= len(tokens):
                    raise ParseError("truncated entry in name-status output")
                entries.append((kind, tokens[i + 1], None))
                i += 2
        return entries
    for line in out.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        kind = _status_kind(parts[0])
        if kind in (ChangeKind.RENAMED, ChangeKind.COPIED):
            if len(parts) != 3:
                raise ParseError(f"malformed rename line {line!r}")
            entries.append((kind, parts[2], parts[1]))
        else:
            if len(parts) != 2:
                raise ParseError(f"malformed name-status line {line!r}")
            entries.append((kind, parts[1], None))
    return entries


_BRACE_RE = re.compile(r"^(?P<pre>.*)\{(?P<old>.*) => (?P<new>.*)\}(?P<post>.*)$")


def _numstat_new_path(path: str) -> str:
    m = _BRACE_RE.match(path)
    if m:
        return (m["pre"] + m["new"] + m["post"]).replace("//", "/")
    if " => " in path:
        return path.split(" => ", 1)[1]
    return path


def _count(value: str) -> int | None:
    return None if value == "-" else int(value)


def _parse_numstat(out: str) -> dict[str, tuple[int | None, int | None]]:
    stats: dict[str, tuple[int | None, int | None]] = {}
    if "\0" in out:
        tokens = out.split("\0")
        if tokens and tokens[-1] == "":
            tokens.pop()
        i = 0
        while i < len(tokens):
            head = tokens[i].lstrip("\n")
            parts = head.split("\t")
            if len(parts) != 3:
                raise ParseError(f"malformed numstat entry {head!r}")
            added, deleted, path = parts
            if path == "":
                # rename/copy: "<a>\t<d>\t\0old\0new\0"
                if i + 2 >= len(tokens):
                    raise ParseError("truncated rename entry in numstat output")
                path = tokens[i + 2]
                i += 3
            else:
                i += 1
            stats[path] = (_count(added), _count(deleted))
        return stats
    for line in out.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ParseError(f"malformed numstat line {line!r}")
        stats[_numstat_new_path(parts[2])] = (_count(parts[0]), _count(parts[1]))
    return stats


def parse_changes(numstat_output: bytes | str, name_status_output: bytes | str) -> list[FileChange]:
    """Join ``--numstat`` and ``--name-status`` output for one diff.

    Accepts either ``-z`` or line-oriented output. Binary files (numstat
    ``-``) get unknown line counts. Renames and copies are keyed by their
    new path.
    """
    ns = decode(numstat_output) if isinstance(numstat_output, bytes) else numstat_output
    st = decode(name_status_output) if isinstance(name_status_output, bytes) else name_status_output
    stats = _parse_numstat(ns)
    changes: list[FileChange] = []
    seen: set[str] = set()
    for kind, path, old in _parse_name_status(st):
        if path in seen:
            raise ParseError(f"path {path!r} listed twice in name-status output")
        if path not in stats:
            raise ParseError(f"path {path!r} missing from numstat output")
        seen.add(path)
        added, deleted = stats[path]
        changes.append(FileChange(kind, path, added, deleted, old))
    extra = set(stats) - seen
    if extra:
        raise ParseError(f"paths missing from name-status output: {sorted(extra)}")
    return changes


def is_commit_hash(value: str) -> bool:
    return bool(_HASH_RE.match(value))
