"""Exhaustive hyper-parameter search scored by cross-validated conflict f1."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, FoldError
from .tree import HyperParams

# candidate values explored for this data size
DEFAULT_GRID = {
    "min_samples_leaf": [2, 5, 10, 20, 35, 50],
    "min_samples_split": [2, 3, 5, 10, 20, 35, 50, 75],
    "max_depth": [1, 3, 5, 7, 11],
    "n_estimators": [1, 3, 10, 50, 75, 100, 200, 300],
}
GRID_KEYS = tuple(DEFAULT_GRID)
SCORE_TOL = 1e-12


@dataclass(frozen=True)
class GridRow:
    hyperparams: dict
    mean_f1_conflict: float
    sd_f1_conflict: float
    mean_f1_safe: float
    fold_f1_conflict: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "hyperparams": self.hyperparams,
            "mean_f1_conflict": self.mean_f1_conflict,
            "sd_f1_conflict": self.sd_f1_conflict,
            "mean_f1_safe": self.mean_f1_safe,
            "fold_f1_conflict": list(self.fold_f1_conflict),
        }


def expand_grid(grids: dict, kind: str, base: HyperParams) -> list[HyperParams]:
    unknown = set(grids) - set(GRID_KEYS)
    if unknown:
        raise ConfigError(f"unknown grid keys {sorted(unknown)}")
    keys = [k for k in GRID_KEYS if k in grids and not (k == "n_estimators" and kind != "rf")]
    cells = []
    for combo in itertools.product(*(grids[k] for k in keys)):
        cells.append(base.with_(**dict(zip(keys, combo))))
    # identical cells (e.g. estimators ignored for trees) collapse
    return list(dict.fromkeys(cells))


def _size_key(hp: HyperParams, kind: str) -> tuple:
    return (hp.n_estimators if kind == "rf" else 0, hp.max_depth)


def grid_search(dataset, grids: dict | None = None, k: int = 10, kind: str = "rf", seed: int = 0,
                base: HyperParams | None = None, n_jobs: int = 1):
    """Return ``(best HyperParams, cv table rows)``.

    Every cell is scored on the same stratified folds. The winner has the
    highest mean conflict-class f1; ties go to fewer estimators, then a
    shallower tree, then grid order.
    """
    from ..evaluator import cross_validate, stratified_folds
    from .spec import ModelSpec

    if kind not in ("dt", "rf", "baseline2"):
        raise ConfigError(f"grid search does not apply to {kind!r}")
    grids = DEFAULT_GRID if grids is None else grids
    base = (base or HyperParams()).with_(seed=seed)
    cells = expand_grid(grids, kind, base)
    if not cells:
        raise ConfigError("empty grid")
    folds = stratified_folds(dataset.y, k, seed)

    rows: list[GridRow] = []
    for hp in cells:
        rep = cross_validate(ModelSpec(kind, hp, n_jobs=n_jobs), dataset, k=k, seed=seed, folds=folds)
        f1c = tuple(f["conflict"]["f1"] for f in rep.folds)
        rows.append(
            GridRow(
                hyperparams=hp.to_dict(),
                mean_f1_conflict=rep.fold_mean["conflict"]["f1"],
                sd_f1_conflict=rep.fold_sd["conflict"]["f1"],
                mean_f1_safe=rep.fold_mean["safe"]["f1"],
                fold_f1_conflict=f1c,
            )
        )
    top = max(r.mean_f1_conflict for r in rows)
    contenders = [i for i, r in enumerate(rows) if r.mean_f1_conflict >= top - SCORE_TOL]
    best = min(contenders, key=lambda i: (*_size_key(cells[i], kind), i))
    return cells[best], rows
