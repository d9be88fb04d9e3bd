"""Scripted git histories for tests and offline end-to-end runs.

:class:`RepoBuilder` drives plain ``git`` with pinned author/committer dates
and identities, so the resulting commit ids are reproducible. On top of it,
:func:`generate_repo` simulates a small team: feature branches fork from
``main``, edit line blocks in a handful of source files, and are merged back
while ``main`` keeps moving. Real ``git merge`` decides whether a merge
conflicts; the generator never labels anything itself.

``python -m mergepred.simcorpus OUT_DIR`` writes a corpus of such repositories
plus a ``catalog.csv`` that ``mergepred mine`` accepts.
"""

from __future__ import annotations

import argparse
import csv
import os
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .git_gateway import run_git

EPOCH = 1_600_000_000
_WORDS = (
    "fix", "bug", "feature", "improve", "document", "refactor", "update", "add", "remove", "use",
    "delete", "change", "parser", "cache", "tests", "config", "handler", "docs", "logging", "api",
)


class RepoBuilder:
    """Minimal scripted-history helper. Every commit carries an explicit time."""

    def __init__(self, path: str | os.PathLike, branch: str = "main"):
        self.path = Path(path)
        if self.path.exists():
            shutil.rmtree(self.path)
        self.path.mkdir(parents=True)
        self.git("init", "-q", "-b", branch)
        self.git("config", "user.name", "builder")
        self.git("config", "user.email", "builder@example.org")
        self.git("config", "commit.gpgsign", "false")
        self.git("config", "core.autocrlf", "false")
        self.git("config", "merge.renames", "true")

    def git(self, *args: str, env: dict | None = None, check: bool = True) -> str:
        res = run_git(self.path, list(args), env=env)
        if check and not res.ok:
            raise RuntimeError(f"git {' '.join(args)} failed: {res.err_text.strip()}")
        return res.text

    @staticmethod
    def _env(email: str, when: int) -> dict:
        stamp = f"@{when} +0000"
        name = email.split("@")[0]
        return {
            "GIT_AUTHOR_NAME": name,
            "GIT_AUTHOR_EMAIL": email,
            "GIT_AUTHOR_DATE": stamp,
            "GIT_COMMITTER_NAME": name,
            "GIT_COMMITTER_EMAIL": email,
            "GIT_COMMITTER_DATE": stamp,
        }

    def write(self, rel: str, text: str) -> None:
        p = self.path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")

    def read(self, rel: str) -> str:
        return (self.path / rel).read_text(encoding="utf-8")

    def files(self) -> list[str]:
        return sorted(p for p in self.git("ls-files", "-z").split("\0") if p)

    def commit(
        self,
        message: str,
        when: int,
        email: str = "dev@example.org",
        write: dict[str, str] | None = None,
        delete: tuple[str, ...] = (),
        rename: dict[str, str] | None = None,
    ) -> str:
        for old, new in (rename or {}).items():
            (self.path / new).parent.mkdir(parents=True, exist_ok=True)
            self.git("mv", old, new)
        for rel, text in (write or {}).items():
            self.write(rel, text)
        for rel in delete:
            self.git("rm", "-q", rel)
        self.git("add", "-A")
        self.git("commit", "-q", "--allow-empty", "-m", message, env=self._env(email, when))
        return self.head()

    def checkout(self, ref: str, create: bool = False) -> None:
        self.git("checkout", "-q", *(["-b"] if create else []), ref)

    def head(self) -> str:
        return self.git("rev-parse", "HEAD").strip()

    def rev(self, ref: str) -> str:
        return self.git("rev-parse", ref).strip()

    def merge(self, *refs: str, when: int, email: str = "dev@example.org", message: str | None = None) -> tuple[str, bool]:
        """Merge ``refs`` into HEAD as a true merge commit.

        A conflicting merge is committed with whatever git left in the
        working tree (markers included). Returns ``(merge id, conflicted)``.
        """
        env = self._env(email, when)
        msg = message or f"Merge {' '.join(refs)}"
        res = run_git(self.path, ["merge", "--no-ff", "--no-edit", "-m", msg, *refs], env=env)
        if res.ok:
            return self.head(), False
        if len(refs) > 1:
            raise RuntimeError(f"octopus merge failed: {res.err_text.strip()}")
        self.git("add", "-A")
        self.git("commit", "-q", "--no-edit", "-m", msg, env=env)
        return self.head(), True


@dataclass
class SimProfile:
    n_files: int = 10
    lines_per_file: int = 150
    branch_commits: tuple[int, int] = (1, 5)
    edits_per_commit: tuple[int, int] = (1, 3)
    block: tuple[int, int] = (1, 2)
    hot_files: int = 3
    hot_bias: float = 0.5
    developers: int = 6
    main_commit_prob: float = 0.5
    open_branches: int = 3
    rewrite_prob: float = 0.3  # share of branches that rewrite large blocks
    rewrite_block: tuple[int, int] = (20, 60)


def _message(rng: np.random.Generator) -> str:
    n = int(rng.integers(2, 9))
    words = [_WORDS[int(i)] for i in rng.integers(0, len(_WORDS), n)]
    words[0] = words[0].capitalize()
    return " ".join(words)


def _file_name(i: int) -> str:
    return f"src/module_{i:02d}.txt"


def _edit(
    builder: RepoBuilder, rng: np.random.Generator, profile: SimProfile, tag: str, block: tuple[int, int] | None = None
) -> dict[str, str]:
    block = block or profile.block
    files = builder.files()
    out: dict[str, str] = {}
    n_edits = int(rng.integers(profile.edits_per_commit[0], profile.edits_per_commit[1] + 1))
    for _ in range(n_edits):
        if rng.random() < profile.hot_bias:
            rel = _file_name(int(rng.integers(0, profile.hot_files)))
            if rel not in files:
                rel = files[int(rng.integers(0, len(files)))]
        else:
            rel = files[int(rng.integers(0, len(files)))]
        lines = (out.get(rel) or builder.read(rel)).splitlines()
        if not lines:
            lines = ["seed"]
        size = int(rng.integers(block[0], block[1] + 1))
        start = int(rng.integers(0, max(1, len(lines) - size)))
        action = rng.random()
        if action < 0.7:
            for k in range(start, min(len(lines), start + size)):
                lines[k] = f"{lines[k].split(' #')[0]} #{tag}"
        elif action < 0.9:
            lines[start:start] = [f"new line {tag}.{k}" for k in range(size)]
        else:
            del lines[start : start + size]
        out[rel] = "\n".join(lines) + "\n"
    return out


def generate_repo(path: str | os.PathLike, n_merges: int, seed: int = 0, profile: SimProfile | None = None) -> RepoBuilder:
    """Build one simulated repository with ``n_merges`` branch merges into main."""
    profile = profile or SimProfile()
    rng = np.random.default_rng(seed)
    b = RepoBuilder(path)
    devs = [f"dev{i}@example.org" for i in range(profile.developers)]
    clock = EPOCH + seed * 1000

    def tick(lo: int = 600, hi: int = 36_000) -> int:
        nonlocal clock
        clock += int(rng.integers(lo, hi))
        return clock

    initial = {
        _file_name(i): "\n".join(f"file {i} line {j}" for j in range(profile.lines_per_file)) + "\n"
        for i in range(profile.n_files)
    }
    b.commit("Initial import", tick(), devs[0], write=initial)

    branches: list[tuple[str, str, tuple[int, int]]] = []  # (name, owner email, block range)
    counter = 0
    merged = 0
    while merged < n_merges:
        b.checkout("main")
        # keep a few branches open so main moves while they are in flight
        while len(branches) < profile.open_branches:
            counter += 1
            name = f"topic-{counter}"
            b.checkout("main")
            b.checkout(name, create=True)
            owner = devs[int(rng.integers(0, len(devs)))]
            block = profile.rewrite_block if rng.random() < profile.rewrite_prob else profile.block
            for c in range(int(rng.integers(profile.branch_commits[0], profile.branch_commits[1] + 1))):
                who = owner if rng.random() < 0.8 else devs[int(rng.integers(0, len(devs)))]
                b.commit(_message(rng), tick(), who, write=_edit(b, rng, profile, f"{name}.{c}", block))
            branches.append((name, owner, block))
        b.checkout("main")
        if rng.random() < profile.main_commit_prob:
            who = devs[int(rng.integers(0, len(devs)))]
            b.commit(_message(rng), tick(), who, write=_edit(b, rng, profile, f"main.{counter}.{merged}"))
        name, owner, block = branches.pop(int(rng.integers(0, len(branches))))
        # a branch may gain one more commit right before it lands
        if rng.random() < 0.3:
            b.checkout(name)
            b.commit(_message(rng), tick(), owner, write=_edit(b, rng, profile, f"{name}.late", block))
            b.checkout("main")
        b.merge(name, when=tick(), email=devs[int(rng.integers(0, len(devs)))], message=f"Merge branch '{name}'")
        b.git("branch", "-q", "-D", name)
        merged += 1
    b.checkout("main")
    return b


CORPUS_LANGUAGES = ("Java", "Python", "C++")


def generate_corpus(out: str | os.PathLike, n_repos: int = 3, merges_per_repo: int = 90, seed: int = 0) -> Path:
    """Write ``n_repos`` simulated repositories and a matching catalog.

    Returns the catalog path. Repository ``i`` uses seed ``seed + i``.
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n_repos):
        name = f"sim/project-{i}"
        path = out / "origin" / name.replace("/", "__")
        generate_repo(path, merges_per_repo, seed=seed + i)
        rows.append([name, path.resolve().as_uri(), CORPUS_LANGUAGES[i % len(CORPUS_LANGUAGES)], "0"])
    catalog = out / "catalog.csv"
    with open(catalog, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "url", "language", "skip"])
        w.writerows(rows)
    return catalog


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="python -m mergepred.simcorpus", description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--repos", type=int, default=3)
    ap.add_argument("--merges", type=int, default=90, help="merges per repository")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    print(generate_corpus(args.out, args.repos, args.merges, args.seed))
    return 0


if __name__ == "__main__":
    sys.exit(main())
