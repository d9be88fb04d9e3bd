"""Mining orchestration: acquire -> enumerate -> replay -> extract -> store."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .catalog import DEFAULT_SIZE_CAP, LocalRepo, RepoSpec, RepoStatus, acquire, open_local
from .dataset import CSV_FILE, DatasetRecord, DatasetWriter, export_csv, load_dataset, write_meta
from .errors import ExtractionError, PreconditionError
from .features import extract_feature_vector, normalize_operator, schema_version
from .git_gateway import git_version
from .miner import (
    DEFAULT_LIMIT,
    MergeLabel,
    MergeScenario,
    MiningSummary,
    Outcome,
    WorktreePool,
    enumerate_merges,
    replay,
)

log = logging.getLogger(__name__)

SCENARIOS_FILE = "scenarios.jsonl"


@dataclass
class RepoResult:
    repo: LocalRepo
    summary: MiningSummary
    labeled: list[tuple[MergeScenario, MergeLabel]] = field(default_factory=list)
    quarantined: bool = False
    error: str = ""


def replay_all(repo: LocalRepo, scenarios: list[MergeScenario], worktree_root: Path, jobs: int = 1):
    """Replay in a pool of linked worktrees; results keep scenario order.

    A restoration failure quarantines the repository: remaining scenarios
    are labeled ReplayError without being attempted.
    """
    labels: list[MergeLabel | None] = [None] * len(scenarios)
    quarantined = False
    with WorktreePool(repo, worktree_root, size=jobs) as pool:

        def work(i: int) -> None:
            nonlocal quarantined
            if quarantined:
                labels[i] = MergeLabel(Outcome.REPLAY_ERROR, (), "repository quarantined")
                return
            with pool.lease() as wt:
                try:
                    labels[i] = replay(wt, scenarios[i])
                except EnvironmentError as exc:
                    quarantined = True
                    labels[i] = MergeLabel(Outcome.REPLAY_ERROR, (), f"restore failed: {exc}")
                except PreconditionError as exc:
                    labels[i] = MergeLabel(Outcome.REPLAY_ERROR, (), str(exc))

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                list(ex.map(work, range(len(scenarios))))
        else:
            for i in range(len(scenarios)):
                work(i)
    return labels, quarantined


def mine_repo(repo: LocalRepo, workdir: Path, limit: int = DEFAULT_LIMIT, jobs: int = 1) -> RepoResult:
    enum = enumerate_merges(repo, limit)
    root = Path(workdir) / "worktrees" / repo.spec.dirname
    labels, quarantined = replay_all(repo, enum.scenarios, root, jobs)
    result = RepoResult(repo, enum.summary, quarantined=quarantined)
    for sc, lb in zip(enum.scenarios, labels):
        result.summary.record(lb)
        result.labeled.append((sc, lb))
    return result


def extract_records(
    repo: LocalRepo,
    labeled: Iterable[tuple[MergeScenario, MergeLabel]],
    operator: str,
    gitver: str,
    jobs: int = 1,
) -> list[DatasetRecord | None]:
    items = [(sc, lb) for sc, lb in labeled if lb.outcome is not Outcome.REPLAY_ERROR]

    def one(item):
        sc, lb = item
        try:
            vec = extract_feature_vector(repo, sc, operator, lb)
        except ExtractionError as exc:
            log.warning("%s: extraction failed: %s", sc.key, exc)
            return None
        return DatasetRecord.from_vector(vec, repo.spec.language, gitver, sc.merge_timestamp)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(one, items))
    return [one(i) for i in items]


def scenario_line(sc: MergeScenario, lb: MergeLabel, language: str) -> str:
    obj = {"scenario": sc.to_dict(), "label": lb.to_dict(), "language": language}
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class MineOutcome:
    out_dir: Path
    written: int
    total_records: int
    summary: MiningSummary
    repos: dict[str, dict]


def mine(
    specs: list[RepoSpec],
    workdir: Path,
    out_dir: Path,
    operator: str = "norm1",
    limit: int = DEFAULT_LIMIT,
    jobs: int = 1,
    size_cap: int = DEFAULT_SIZE_CAP,
    offline: bool = False,
) -> MineOutcome:
    """Run the full mining stage for every catalog entry.

    Per-repository failures are recorded in the outcome and never abort the
    batch.
    """
    operator = normalize_operator(operator)
    gitver = git_version()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    total = MiningSummary()
    repos: dict[str, dict] = {}
    scenario_lines: list[str] = []
    written = 0
    with DatasetWriter(out_dir, operator) as sink:
        for spec in specs:
            repo = open_local(spec, workdir) if offline else acquire(spec, workdir, size_cap)
            entry = {"status": repo.status.value, "language": spec.language}
            if spec.skip:
                entry["status"] = RepoStatus.SKIPPED.value
            if not repo.ready:
                entry["detail"] = repo.detail
                repos[spec.name] = entry
                log.warning("%s: %s (%s)", spec.name, repo.status.value, repo.detail)
                continue
            try:
                res = mine_repo(repo, workdir, limit, jobs)
            except Exception as exc:  # one bad repository must not stop the batch
                log.exception("%s: mining failed", spec.name)
                entry.update(status="MiningFailed", detail=str(exc))
                repos[spec.name] = entry
                continue
            records = extract_records(repo, res.labeled, operator, gitver, jobs)
            n_new = 0
            for rec in records:
                if rec is not None and sink.append(rec):
                    n_new += 1
            written += n_new
            scenario_lines += [scenario_line(sc, lb, spec.language) for sc, lb in res.labeled]
            total.add(res.summary)
            entry.update(summary=res.summary.to_dict(), new_records=n_new, quarantined=res.quarantined,
                         extraction_failures=sum(1 for r in records if r is None))
            repos[spec.name] = entry
        total_records = len(sink)

    with open(out_dir / SCENARIOS_FILE, "w", encoding="utf-8") as fh:
        for line in scenario_lines:
            fh.write(line + "\n")
        fh.write(json.dumps({"summary": total.to_dict()}, sort_keys=True) + "\n")

    meta = {
        "schema_version": schema_version(),
        "operator": operator,
        "git_version": gitver,
        "merge_limit": limit,
        "file_changes": "endpoint diff ancestor->tip",
        "mining_summary": total.to_dict(),
        "repositories": repos,
    }
    write_meta(out_dir, meta)
    if total_records:
        export_csv(load_dataset(out_dir), out_dir / CSV_FILE)
    return MineOutcome(out_dir, written, total_records, total, repos)


def read_scenarios(path: str | os.PathLike) -> list[tuple[MergeScenario, MergeLabel, str]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            if "scenario" not in obj:
                continue
            lb = obj["label"]
            out.append(
                (
                    MergeScenario(**obj["scenario"]),
                    MergeLabel(Outcome(lb["outcome"]), tuple(lb["conflicting_paths"]), lb["detail"]),
                    obj.get("language", ""),
                )
            )
    return out
