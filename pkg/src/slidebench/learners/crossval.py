"""Stratified k-fold cross-validation over hyperparameter grids.

Fold assignment is computed once per call, so every grid point is scored
on identical folds (paired comparison). Grids that differ only in
n_estimators are evaluated from a single fit per fold via staged
predictions, which is exact because ensemble members are seeded
independently of the requested total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import ClassifierSpec
from .factory import build_classifier


@dataclass(frozen=True)
class CvPlan:
    n_folds: int = 5
    stratified: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_folds < 2:
            raise ValueError("n_folds must be >= 2")


def stratified_folds(y: np.ndarray, plan: CvPlan) -> np.ndarray:
    """Fold id per row; per-class counts across folds differ by at most 1."""
    y = np.asarray(y)
    n = y.shape[0]
    if n < plan.n_folds:
        raise ValueError(f"cannot make {plan.n_folds} folds from {n} rows")
    rng = np.random.default_rng(plan.seed)
    folds = np.empty(n, dtype=np.int64)
    if not plan.stratified:
        order = rng.permutation(n)
        folds[order] = np.arange(n) % plan.n_folds
        return folds
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < plan.n_folds:
            raise ValueError(
                f"class {cls!r} has {idx.size} rows; stratified {plan.n_folds}-fold "
                "split would leave folds without it"
            )
        perm = idx[rng.permutation(idx.size)]
        folds[perm] = np.arange(idx.size) % plan.n_folds
    return folds


@dataclass
class CvResult:
    best_spec: ClassifierSpec
    best_index: int
    mean_accuracy: np.ndarray       # per grid spec
    fold_accuracy: np.ndarray       # (n_specs, n_folds)
    folds: np.ndarray               # fold id per training row
    spec_ids: list[str]

    def summary(self) -> list[dict]:
        return [
            {
                "spec": spec_id,
                "mean_accuracy": float(self.mean_accuracy[i]),
                "fold_accuracy": [float(a) for a in self.fold_accuracy[i]],
            }
            for i, spec_id in enumerate(self.spec_ids)
        ]


_STAGEABLE = {"random_forest", "gradient_boosting", "adaboost"}


def _family_key(spec: ClassifierSpec) -> tuple:
    rest = tuple(sorted((k, repr(v)) for k, v in spec.params.items() if k != "n_estimators"))
    return (spec.kind, spec.seed, rest)


def cross_validate(
    grid: list[ClassifierSpec],
    X: np.ndarray,
    y: np.ndarray,
    plan: CvPlan,
) -> CvResult:
    """Score every spec by mean held-out-fold accuracy; ties keep the
    earliest grid position."""
    if not grid:
        raise ValueError("empty hyperparameter grid")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    folds = stratified_folds(y, plan)
    acc = np.zeros((len(grid), plan.n_folds))

    # Group stageable specs into families sharing all params but n_estimators.
    families: dict[tuple, list[int]] = {}
    singles: list[int] = []
    for i, spec in enumerate(grid):
        if spec.kind in _STAGEABLE:
            families.setdefault(_family_key(spec), []).append(i)
        else:
            singles.append(i)

    for fold in range(plan.n_folds):
        val = folds == fold
        Xt, yt = X[~val], y[~val]
        Xv, yv = X[val], y[val]
        for i in singles:
            model = build_classifier(grid[i]).fit(Xt, yt)
            acc[i, fold] = float(np.mean(model.predict(Xv) == yv))
        for members in families.values():
            stages = [int(grid[i].params.get("n_estimators", 100)) for i in members]
            order = np.argsort(stages, kind="stable")
            top = members[int(order[-1])]
            model = build_classifier(grid[top]).fit(Xt, yt)
            probas = model.staged_proba(Xv, sorted(stages))
            for rank, pos in enumerate(order):
                pred = model.classes_[np.argmax(probas[rank], axis=1)]
                acc[members[int(pos)], fold] = float(np.mean(pred == yv))

    mean_acc = acc.mean(axis=1)
    best = int(np.argmax(mean_acc))
    return CvResult(
        best_spec=grid[best],
        best_index=best,
        mean_accuracy=mean_acc,
        fold_accuracy=acc,
        folds=folds,
        spec_ids=[s.spec_id() for s in grid],
    )
