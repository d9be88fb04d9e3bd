"""Repository catalog ingestion and local clone management."""

from __future__ import annotations

import csv
import logging
import os
import shutil
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import CatalogError
from .git_gateway import run_git
from .locks import FileLock

log = logging.getLogger(__name__)

DEFAULT_LANGUAGES = ("C", "C++", "C#", "Java", "PHP", "Python", "Ruby")
CATALOG_HEADER = ("name", "url", "language", "skip")
WORKDIR_ENV = "MERGEPRED_WORKDIR"
DEFAULT_SIZE_CAP = 1 << 30


class RepoStatus(str, Enum):
    READY = "Ready"
    TOO_LARGE = "TooLarge"
    CLONE_FAILED = "CloneFailed"
    SKIPPED = "Skipped"


@dataclass(frozen=True)
class RepoSpec:
    name: str
    url: str
    language: str
    skip: bool = False
    size_hint: int | None = None

    @property
    def dirname(self) -> str:
        return self.name.replace("/", "__")


@dataclass(frozen=True)
class LocalRepo:
    spec: RepoSpec
    path: Path
    head: str | None
    acquired_at: float
    status: RepoStatus
    detail: str = ""

    @property
    def ready(self) -> bool:
        return self.status is RepoStatus.READY


def load_catalog(file: str | os.PathLike, languages: Iterable[str] | None = DEFAULT_LANGUAGES) -> list[RepoSpec]:
    """Read a ``name,url,language,skip`` CSV catalog.

    ``languages`` is the declared label set; pass ``None`` to accept any label.
    An optional ``size_hint`` column (bytes) is honoured when present.
    """
    allowed = set(languages) if languages is not None else None
    specs: list[RepoSpec] = []
    seen: dict[str, int] = {}
    with open(file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        header = [h.strip() for h in header]
        missing = [h for h in CATALOG_HEADER if h not in header]
        if missing:
            raise CatalogError(f"header lacks columns {missing}", 1)
        idx = {h: header.index(h) for h in header}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise CatalogError(f"expected {len(header)} fields, got {len(row)}", lineno)
            vals = {h: row[i].strip() for h, i in idx.items()}
            for field in ("name", "url", "language"):
                if not vals[field]:
                    raise CatalogError(f"empty {field!r}", lineno)
            if vals["skip"] not in ("0", "1"):
                raise CatalogError(f"skip must be 0 or 1, got {vals['skip']!r}", lineno)
            if allowed is not None and vals["language"] not in allowed:
                raise CatalogError(f"language {vals['language']!r} not in {sorted(allowed)}", lineno)
            name = vals["name"]
            if name in seen:
                raise CatalogError(f"duplicate name {name!r} (first on line {seen[name]})", lineno)
            seen[name] = lineno
            hint = vals.get("size_hint") or None
            specs.append(
                RepoSpec(
                    name=name,
                    url=vals["url"],
                    language=vals["language"],
                    skip=vals["skip"] == "1",
                    size_hint=int(hint) if hint else None,
                )
            )
    return specs


def resolve_workdir(flag: str | os.PathLike | None) -> Path:
    """CLI flag wins over the environment; default is ``./mergepred-work``."""
    if flag:
        return Path(flag)
    env = os.environ.get(WORKDIR_ENV)
    return Path(env) if env else Path("mergepred-work")


def repos_dir(workdir: str | os.PathLike) -> Path:
    return Path(workdir).resolve() / "repos"


def disk_usage(path: Path) -> int:
    total = 0
    for root, _dirs, files in os.walk(path):
        for f in files:
            try:
                total += os.lstat(os.path.join(root, f)).st_size
            except OSError:
                pass
    return total


def _resolve_head(path: Path) -> str | None:
    res = run_git(path, ["rev-parse", "--verify", "-q", "HEAD^{commit}"])
    return res.text.strip() if res.ok else None


def _is_valid_clone(path: Path) -> bool:
    if not (path / ".git").exists():
        return False
    return _resolve_head(path) is not None


def acquire(spec: RepoSpec, workdir: str | os.PathLike, size_cap: int = DEFAULT_SIZE_CAP) -> LocalRepo:
    """Clone (or refresh) ``spec`` under ``workdir/repos``.

    Never raises for per-repository problems: the outcome is carried by
    ``LocalRepo.status``. Non-ready outcomes leave no directory behind.
    """
    target = repos_dir(workdir) / spec.dirname
    now = time.time()
    if spec.skip:
        return LocalRepo(spec, target, None, now, RepoStatus.SKIPPED, "marked skip in catalog")

    lock_path = repos_dir(workdir) / ".locks" / f"{spec.dirname}.lock"
    with FileLock(lock_path, blocking=True):
        if _is_valid_clone(target):
            res = run_git(target, ["fetch", "--quiet", "origin"], timeout=3600)
            if not res.ok:
                log.warning("fetch failed for %s: %s", spec.name, res.err_text.strip())
            detail = "reused existing clone"
        else:
            if target.exists():
                shutil.rmtree(target)
            target.parent.mkdir(parents=True, exist_ok=True)
            try:
                res = run_git(None, ["clone", "--quiet", spec.url, str(target)], timeout=3600)
            except TimeoutError as exc:
                shutil.rmtree(target, ignore_errors=True)
                return LocalRepo(spec, target, None, time.time(), RepoStatus.CLONE_FAILED, str(exc))
            if not res.ok:
                shutil.rmtree(target, ignore_errors=True)
                return LocalRepo(
                    spec, target, None, time.time(), RepoStatus.CLONE_FAILED, res.err_text.strip()
                )
            detail = "cloned"

        size = disk_usage(target)
        if size > size_cap:
            shutil.rmtree(target, ignore_errors=True)
            return LocalRepo(
                replace(spec, size_hint=size),
                target,
                None,
                time.time(),
                RepoStatus.TOO_LARGE,
                f"{size} bytes exceeds cap {size_cap}",
            )
        head = _resolve_head(target)
        if head is None:
            shutil.rmtree(target, ignore_errors=True)
            return LocalRepo(spec, target, None, time.time(), RepoStatus.CLONE_FAILED, "HEAD does not resolve")
    return LocalRepo(replace(spec, size_hint=size), target, head, time.time(), RepoStatus.READY, detail)


def open_local(spec: RepoSpec, workdir: str | os.PathLike) -> LocalRepo:
    """Look up an already-acquired clone without touching the network."""
    target = repos_dir(workdir) / spec.dirname
    head = _resolve_head(target) if target.exists() else None
    status = RepoStatus.READY if head else RepoStatus.CLONE_FAILED
    return LocalRepo(spec, target, head, time.time(), status, "" if head else "no local clone")


def local_repo_from_path(path: str | os.PathLike, name: str | None = None, language: str = "") -> LocalRepo:
    """Wrap an arbitrary existing repository (e.g. for ``predict``)."""
    p = Path(path)
    head = _resolve_head(p)
    spec = RepoSpec(name=name or p.name, url=str(p), language=language)
    status = RepoStatus.READY if head else RepoStatus.CLONE_FAILED
    return LocalRepo(spec, p, head, time.time(), status)
