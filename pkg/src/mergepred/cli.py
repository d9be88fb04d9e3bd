"""Command-line entry point: ``mergepred <command>``.

Exit codes: 0 success (``predict``: safe), 10 ``predict`` verdict conflict,
1 failure, 2 unusable environment or input, 3 unrelated refs, 4 schema
mismatch between model and data.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import analytics, plotting
from .catalog import DEFAULT_LANGUAGES, local_repo_from_path, load_catalog, open_local, resolve_workdir, RepoSpec
from .dataset import CSV_FILE, DatasetRecord, DatasetWriter, export_csv, load_dataset, write_meta
from .errors import (
    CatalogError,
    ConfigError,
    DegenerateInputError,
    ExtractionError,
    FoldError,
    MergePredError,
    RangeError,
    SchemaError,
    TrainingError,
)
from .evaluator import cross_validate, evaluate_model, format_table
from .features import DEFAULT_OPERATOR, extract_feature_vector, feature_names, normalize_operator, resolve
from .git_gateway import check_git_version
from .learner import (
    DEFAULT_GRID,
    ForestModel,
    HyperParams,
    ModelSpec,
    grid_search,
    load_model,
    model_kind,
    predict,
    save_model,
    train,
)
from .learner.spec import KIND_LABELS, KINDS
from .miner import DEFAULT_LIMIT, MergeScenario, find_ancestor
from .pipeline import mine, read_scenarios

log = logging.getLogger("mergepred")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ENV = 2
EXIT_UNRELATED = 3
EXIT_SCHEMA = 4
EXIT_CONFLICT = 10


@dataclass
class RunConfig:
    workdir: str | None = None
    catalog: str | None = None
    limit: int = DEFAULT_LIMIT
    operator: str = DEFAULT_OPERATOR
    seed: int = 0
    folds: int = 10
    language: str | None = None
    jobs: int = 1
    classifier: str = "rf"
    hyperparams: dict = field(default_factory=dict)
    grid: dict | None = None

    def hp(self) -> HyperParams:
        return HyperParams.from_dict({**self.hyperparams, "seed": self.seed})


def load_config(path: str | None) -> RunConfig:
    cfg = RunConfig()
    if not path:
        return cfg
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    names = {f.name for f in fields(RunConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in data.items():
        setattr(cfg, key, value)
    return cfg


def _apply_globals(cfg: RunConfig, args) -> RunConfig:
    for name in ("workdir", "seed", "language", "operator", "jobs"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    cfg.operator = normalize_operator(cfg.operator)
    return cfg


def _write_json(path: Path, obj: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# commands


def cmd_mine(cfg: RunConfig, args) -> int:
    try:
        check_git_version()
    except EnvironmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    catalog = args.catalog or cfg.catalog
    if not catalog:
        print("error: no catalog given (--catalog or config 'catalog')", file=sys.stderr)
        return EXIT_ENV
    try:
        specs = load_catalog(catalog, languages=None if args.any_language else DEFAULT_LANGUAGES)
    except (CatalogError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    if cfg.language:
        specs = [s for s in specs if s.language == cfg.language]
    if not specs:
        print("error: catalog is empty", file=sys.stderr)
        return EXIT_ENV
    workdir = resolve_workdir(cfg.workdir)
    out_dir = Path(args.out) if args.out else workdir / "dataset"
    limit = args.limit or cfg.limit
    outcome = mine(specs, workdir, out_dir, cfg.operator, limit, cfg.jobs, offline=args.offline)
    summary = {
        "out": str(outcome.out_dir),
        "new_records": outcome.written,
        "records": outcome.total_records,
        "summary": outcome.summary.to_dict(),
        "repositories": outcome.repos,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK if outcome.total_records >= 1 else EXIT_FAIL


def cmd_extract(cfg: RunConfig, args) -> int:
    if args.repo:
        repo = local_repo_from_path(args.repo)
        res_p = [resolve(repo, r) for r in args.merge_parents] if args.merge_parents else None
        if args.merge:
            parents = _parents_of(repo.path, args.merge)
            if len(parents) != 2:
                print(f"error: {args.merge} is not a 3-way merge", file=sys.stderr)
                return EXIT_FAIL
            res_p = parents
        if not res_p:
            print("error: --merge or --parents is required with --repo", file=sys.stderr)
            return EXIT_ENV
        base = find_ancestor(repo, *res_p)
        if base is None:
            print("error: refs share no history", file=sys.stderr)
            return EXIT_UNRELATED
        sc = MergeScenario(repo.spec.name, args.merge or "", res_p[0], res_p[1], base, 0)
        vec = extract_feature_vector(repo, sc, cfg.operator)
        print(json.dumps(dict(zip(feature_names(cfg.operator), vec.values)), indent=2))
        return EXIT_OK

    if not args.scenarios or not args.out:
        print("error: need --repo, or --scenarios with --out", file=sys.stderr)
        return EXIT_ENV
    workdir = resolve_workdir(cfg.workdir)
    from .git_gateway import git_version
    from .miner import Outcome

    gitver = git_version()
    repos: dict[str, Any] = {}
    written = 0
    out = Path(args.out)
    with DatasetWriter(out, cfg.operator) as sink:
        for sc, lb, lang in read_scenarios(args.scenarios):
            if lb.outcome is Outcome.REPLAY_ERROR:
                continue
            if cfg.language and lang != cfg.language:
                continue
            if sc.repo not in repos:
                repos[sc.repo] = open_local(RepoSpec(sc.repo, "", lang), workdir)
            repo = repos[sc.repo]
            if not repo.ready:
                log.warning("%s: no local clone under %s", sc.repo, workdir)
                continue
            try:
                vec = extract_feature_vector(repo, sc, cfg.operator, lb)
            except ExtractionError as exc:
                log.warning("%s: %s", sc.key, exc)
                continue
            if sink.append(DatasetRecord.from_vector(vec, lang, gitver, sc.merge_timestamp)):
                written += 1
    ds = load_dataset(out)
    write_meta(out, {"schema_version": ds.schema_version, "operator": cfg.operator, "git_version": gitver,
                     "source_scenarios": Path(args.scenarios).name})
    if len(ds):
        export_csv(ds, out / CSV_FILE)
    print(json.dumps({"out": str(out), "new_records": written, "records": len(ds)}, sort_keys=True))
    return EXIT_OK if len(ds) else EXIT_FAIL


def _parents_of(path: Path, rev: str) -> list[str]:
    from .git_gateway import run_git

    res = run_git(path, ["rev-list", "--parents", "-n", "1", rev])
    if not res.ok:
        raise RangeError(f"{rev!r} does not resolve")
    return res.text.split()[1:]


def _hp_from_args(cfg: RunConfig, args) -> HyperParams:
    hp = cfg.hp()
    overrides = {
        "min_samples_leaf": args.min_samples_leaf,
        "min_samples_split": args.min_samples_split,
        "max_depth": args.max_depth,
        "n_estimators": args.n_estimators,
    }
    return hp.with_(**{k: v for k, v in overrides.items() if v is not None})


def cmd_train(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.dataset, cfg.language)
    if not len(ds):
        print("error: dataset is empty", file=sys.stderr)
        return EXIT_FAIL
    kind = args.classifier or cfg.classifier
    hp = _hp_from_args(cfg, args)
    k = args.folds or cfg.folds
    workdir = resolve_workdir(cfg.workdir)
    suffix = f"-{cfg.language}" if cfg.language else ""
    out = Path(args.out) if args.out else workdir / "models" / f"{kind}{suffix}.json"
    cv: dict[str, Any] = {"classifier": kind, "k": k, "seed": cfg.seed, "objective": "mean fold f1 (conflicting)"}
    try:
        if args.grid and kind != "baseline1":
            grids = DEFAULT_GRID if args.grid == "default" else (cfg.grid or DEFAULT_GRID)
            hp, rows = grid_search(ds, grids, k=k, kind=kind, seed=cfg.seed, base=hp, n_jobs=cfg.jobs)
            cv["rows"] = [r.to_dict() for r in rows]
        elif not args.no_cv:
            rep = cross_validate(ModelSpec(kind, hp, cfg.jobs), ds, k=k, seed=cfg.seed)
            cv["rows"] = [{
                "hyperparams": rep.hyperparams,
                "mean_f1_conflict": rep.fold_mean["conflict"]["f1"],
                "sd_f1_conflict": rep.fold_sd["conflict"]["f1"],
                "mean_f1_safe": rep.fold_mean["safe"]["f1"],
                "fold_f1_conflict": [f["conflict"]["f1"] for f in rep.folds],
            }]
        model = train(ModelSpec(kind, hp, cfg.jobs), ds)
    except (FoldError, TrainingError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    save_model(model, out)
    cv["selected"] = {} if kind == "baseline1" else hp.to_dict()
    _write_json(out.with_suffix(".cv.json"), cv)
    print(json.dumps({"model": str(out), "classifier": kind, "hyperparams": cv["selected"]}, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.dataset, cfg.language)
    reports = []
    try:
        for path in args.model:
            model = load_model(path)
            if model.operator and model.operator != ds.operator:
                raise SchemaError(f"{path}: model operator {model.operator!r} != dataset operator {ds.operator!r}")
            if model.n_features != len(feature_names(ds.operator)):
                raise SchemaError(f"{path}: {model.n_features} features vs dataset {len(feature_names(ds.operator))}")
            if args.held_out:
                reports.append(evaluate_model(model, ds, seed=cfg.seed))
            else:
                kind = model_kind(model)
                hp = HyperParams() if kind == "baseline1" else model.hyperparams
                spec = ModelSpec(kind, hp, cfg.jobs)
                reports.append(cross_validate(spec, ds, k=args.folds or cfg.folds, seed=cfg.seed,
                                              chronological=args.chronological))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (FoldError, TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(args.out) if args.out else resolve_workdir(cfg.workdir) / "reports" / "evaluation.json"
    payload = {"reports": [r.to_dict() | {"label": r.label} for r in reports]}
    _write_json(out, payload)
    table = format_table(reports, title=f"dataset {Path(ds.source).parent.name} ({len(ds)} merges)")
    out.with_suffix(".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def cmd_correlate(cfg: RunConfig, args) -> int:
    ds = load_dataset(args.dataset, cfg.language)
    try:
        corr = analytics.correlation_report(ds, exact=args.exact)
    except DegenerateInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.model:
        tree = load_model(args.model)
        if isinstance(tree, ForestModel) or model_kind(tree) != "dt":
            print("error: importance needs a decision-tree model", file=sys.stderr)
            return EXIT_FAIL
    else:
        tree = train(ModelSpec("dt", _hp_from_args(cfg, args)), ds)
    importance = analytics.feature_importance(tree, ds.operator)
    out = Path(args.out) if args.out else resolve_workdir(cfg.workdir) / "reports" / "correlation.json"
    payload = corr.to_dict()
    payload["importance"] = [{"feature_set_id": e.feature_set_id, "importance": e.importance} for e in importance]
    payload["importance_meta"] = {
        "model": "decision tree",
        "hyperparams": tree.hyperparams.to_dict(),
        "set_aggregation": "mean over member features",
    }
    _write_json(out, payload)
    table = analytics.format_correlation_table(corr, importance)
    out.with_suffix(".txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def run_predict(repo_path: str | Path, ref1: str, ref2: str, model) -> tuple[dict, int]:
    """Live verdict for merging ``ref2`` into ``ref1``; read-only on the repository."""
    start = time.perf_counter()
    repo = local_repo_from_path(repo_path)
    try:
        p1, p2 = resolve(repo, ref1), resolve(repo, ref2)
    except RangeError as exc:
        return {"error": str(exc)}, EXIT_FAIL
    base = find_ancestor(repo, p1, p2)
    if base is None:
        return {"error": f"{ref1} and {ref2} share no history"}, EXIT_UNRELATED
    sc = MergeScenario(repo.spec.name, "", p1, p2, base, 0)
    op = model.operator or DEFAULT_OPERATOR
    vec = extract_feature_vector(repo, sc, op)
    label, frac = predict(model, vec.values, rng=np.random.default_rng(0))
    elapsed = (time.perf_counter() - start) * 1000.0
    verdict = {
        "verdict": "conflict" if label == 1 else "safe",
        "vote_fraction": frac,
        "features": dict(zip(feature_names(op), vec.values)),
        "parent1": p1,
        "parent2": p2,
        "ancestor": base,
        "elapsed_ms": round(elapsed, 3),
    }
    return verdict, EXIT_CONFLICT if label == 1 else EXIT_OK


def _route_model(cfg: RunConfig, args):
    if args.model:
        return load_model(args.model)
    if args.model_dir and cfg.language:
        path = Path(args.model_dir) / f"{cfg.language}.json"
        if path.exists():
            return load_model(path)
        raise ConfigError(f"no model for language {cfg.language!r} in {args.model_dir}")
    raise ConfigError("need --model, or --model-dir with --language")


def cmd_predict(cfg: RunConfig, args) -> int:
    try:
        model = _route_model(cfg, args)
    except (ConfigError, OSError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    try:
        verdict, code = run_predict(args.repo, args.ref1, args.ref2, model)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(json.dumps(verdict, indent=2, sort_keys=True))
    return code


def _write_tsv(path: Path, header: list[str], rows: list[list]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def cmd_report(cfg: RunConfig, args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    produced = []
    rows: list[dict] = []
    for path in args.evaluation or []:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        for rep in payload["reports"]:
            rep.setdefault("label", KIND_LABELS.get(rep["classifier"], rep["classifier"]))
            rows.append(rep)
    if rows:
        tsv_rows = []
        for r in rows:
            s, c = r["pooled"]["safe"], r["pooled"]["conflict"]
            tsv_rows.append([r["label"], *(f"{s[m]:.4f}" for m in ("precision", "recall", "f1")),
                             *(f"{c[m]:.4f}" for m in ("precision", "recall", "f1")),
                             r["confusion"]["tp"], r["confusion"]["fp"], r["confusion"]["tn"], r["confusion"]["fn"]])
        produced.append(_write_tsv(out / "classifiers.tsv",
                                   ["classifier", "precision_S", "recall_S", "f1_S",
                                    "precision_C", "recall_C", "f1_C", "tp_C", "fp_C", "tn_C", "fn_C"], tsv_rows))
        produced.append(plotting.plot_classifier_metrics(rows, out / "classifiers.png"))
        if all(r.get("folds") for r in rows):
            produced.append(plotting.plot_fold_spread(rows, out / "fold_f1.png"))
    if args.correlation:
        corr = json.loads(Path(args.correlation).read_text(encoding="utf-8"))
        imp = {e["feature_set_id"]: e["importance"] for e in corr.get("importance", [])}
        produced.append(_write_tsv(
            out / "feature_sets.tsv",
            ["feature_set", "coefficient", "p_value", "strength", "importance"],
            [[e["feature_set_id"], f"{e['coefficient']:.4f}", f"{e['p_value']:.4g}", e["strength"],
              f"{imp[e['feature_set_id']]:.4f}" if imp else ""] for e in corr["entries"]],
        ))
        produced.append(plotting.plot_feature_sets(corr, corr.get("importance"), out / "feature_sets.png"))
    if not produced:
        print("error: nothing to report (give --evaluation and/or --correlation)", file=sys.stderr)
        return EXIT_ENV
    for p in produced:
        print(p)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with RunConfig keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--workdir", help="overrides $MERGEPRED_WORKDIR")
    common.add_argument("--language")
    common.add_argument("--operator", help="min|max|avg|median|norm1|norm2|concat")
    common.add_argument("--jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mergepred", parents=[common],
                                     description="Mine merge scenarios and predict merge conflicts.")
    sub = parser.add_subparsers(dest="command", required=True)

    def hp_flags(p):
        p.add_argument("--min-samples-leaf", type=int)
        p.add_argument("--min-samples-split", type=int)
        p.add_argument("--max-depth", type=int)
        p.add_argument("--n-estimators", type=int)

    p = sub.add_parser("mine", parents=[common], help="acquire repos, replay merges, write the dataset")
    p.add_argument("--catalog")
    p.add_argument("--out", help="dataset directory (default <workdir>/dataset)")
    p.add_argument("--limit", type=int, help="newest merges per repository (default 1000)")
    p.add_argument("--offline", action="store_true", help="use existing clones, never clone/fetch")
    p.add_argument("--any-language", action="store_true", help="accept labels outside the default seven")
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("extract", parents=[common], help="(re)extract feature vectors")
    p.add_argument("--repo", help="repository path for a single scenario")
    p.add_argument("--merge", help="merge commit to describe (with --repo)")
    p.add_argument("--parents", dest="merge_parents", nargs=2, metavar="REF")
    p.add_argument("--scenarios", help="scenarios.jsonl from a previous mine")
    p.add_argument("--out", help="dataset directory for --scenarios")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common], help="fit a classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--classifier", choices=KINDS)
    p.add_argument("--grid", choices=("default", "config"), help="grid-search before fitting")
    p.add_argument("--folds", type=int)
    p.add_argument("--no-cv", action="store_true", help="skip the cross-validation table")
    p.add_argument("--out", help="model file")
    hp_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="cross-validate or score models")
    p.add_argument("--model", required=True, action="append")
    p.add_argument("--dataset", required=True)
    p.add_argument("--folds", type=int)
    p.add_argument("--held-out", action="store_true", help="score the trained model as-is")
    p.add_argument("--chronological", action="store_true", help="time-ordered folds")
    p.add_argument("--out", help="report JSON path (a .txt table is written next to it)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("correlate", parents=[common], help="feature-set correlation and importance")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", help="decision-tree model for importance (default: fit one)")
    p.add_argument("--exact", action="store_true", help="exact permutation p-values (n <= 8)")
    p.add_argument("--out")
    hp_flags(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("predict", parents=[common], help="live verdict for two refs")
    p.add_argument("--repo", default=".")
    p.add_argument("ref1")
    p.add_argument("ref2")
    p.add_argument("--model")
    p.add_argument("--model-dir", help="directory of <language>.json models")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", parents=[common], help="figures and TSV tables from reports")
    p.add_argument("--evaluation", action="append", help="evaluation JSON (repeatable)")
    p.add_argument("--correlation", help="correlation JSON")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_globals(load_config(args.config), args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except EnvironmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENV
    except MergePredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
