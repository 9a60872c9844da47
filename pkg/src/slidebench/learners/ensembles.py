"""Tree ensembles: bagged forests, softmax gradient boosting, SAMME AdaBoost.

All three share the binned tree engine. Member models are seeded
independently (forest) or grown sequentially (boosting), so an ensemble
truncated to its first t members is identical to one fit with
n_estimators=t; cross-validation exploits this for staged evaluation.
"""

from __future__ import annotations

import numpy as np

from .base import (
    BaseClassifier,
    ClassifierSpec,
    check_training_inputs,
    normalize_rows,
    one_hot,
    softmax,
)
from .trees import DEFAULT_MAX_BINS, FittedTree, TreeParams, bin_features, grow_tree

# Smallest usable weighted error / hessian in boosting updates.
_EPS = 1e-12


class RandomForest(BaseClassifier):
    """Bootstrap-bagged CART trees with per-split feature subsampling."""

    def __init__(self, spec: ClassifierSpec):
        super().__init__(spec)
        self.trees_: list[FittedTree] = []

    def _resolve_max_features(self, d: int) -> int | None:
        raw = self.spec.params.get("max_features", "sqrt")
        if raw is None:
            return None
        if raw == "sqrt":
            return max(1, int(np.sqrt(d)))
        return int(raw)

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForest":
        X, y = check_training_inputs(X, y)
        codes = self._encode(y)
        n, d = X.shape
        k = len(self.classes_)
        n_estimators = self.spec.params.get("n_estimators", 100)
        bootstrap = self.spec.params.get("bootstrap", True)
        params = TreeParams(
            max_depth=self.spec.params.get("max_depth"),
            min_samples_split=self.spec.params.get("min_samples_split", 2),
            min_samples_leaf=self.spec.params.get("min_samples_leaf", 1),
            max_features=self._resolve_max_features(d),
        )
        table = bin_features(X, self.spec.params.get("max_bins", DEFAULT_MAX_BINS))
        self.trees_ = []
        for t in range(n_estimators):
            rng = np.random.default_rng(np.random.SeedSequence([self.spec.seed & 0xFFFFFFFF, t]))
            if bootstrap:
                draw = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
                rows = np.flatnonzero(draw > 0)
                weight = draw[rows]
            else:
                rows = np.arange(n)
                weight = None
            tree, _ = grow_tree(
                table, "gini", codes, params, n_classes=k,
                sample_weight=weight, rows=rows, rng=rng,
            )
            self.trees_.append(tree)
        self._d = d
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._require_fitted()
        X = self._check_predict_input(X, self._d)
        acc = np.zeros((X.shape[0], len(self.classes_)))
        for tree in self.trees_:
            acc += tree.predict_value(X)
        return normalize_rows(acc / len(self.trees_))

    def staged_proba(self, X: np.ndarray, stages: list[int]) -> list[np.ndarray]:
        """Probabilities using only the first t trees, for each t in stages."""
        self._require_fitted()
        X = self._check_predict_input(X, self._d)
        acc = np.zeros((X.shape[0], len(self.classes_)))
        out = []
        stage_iter = iter(sorted(stages))
        target = next(stage_iter, None)
        for t, tree in enumerate(self.trees_, start=1):
            acc += tree.predict_value(X)
            while target is not None and t == min(target, len(self.trees_)):
                out.append(normalize_rows(acc / t))
                target = next(stage_iter, None)
        while target is not None:
            out.append(normalize_rows(acc / len(self.trees_)))
            target = next(stage_iter, None)
        return out

    def _require_fitted(self) -> None:
        if not self.trees_:
            raise ValueError("classifier is not fitted")


class GradientBoosting(BaseClassifier):
    """Additive per-class regression trees on softmax residuals.

    Each round fits one least-squares tree per class to y_k - p_k, then
    replaces leaf values by damped Newton steps (sum of residuals over sum
    of p_k(1-p_k)) scaled by the learning rate.
    """

    def __init__(self, spec: ClassifierSpec):
        super().__init__(spec)
        self.rounds_: list[list[FittedTree]] = []
        self.train_loss_: list[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradientBoosting":
        X, y = check_training_inputs(X, y)
        codes = self._encode(y)
        n, d = X.shape
        k = len(self.classes_)
        n_rounds = self.spec.params.get("n_estimators", 100)
        lr = self.spec.params.get("learning_rate", 0.1)
        params = TreeParams(
            max_depth=self.spec.params.get("max_depth", 2),
            min_samples_split=self.spec.params.get("min_samples_split", 2),
            min_samples_leaf=self.spec.params.get("min_samples_leaf", 1),
        )
        table = bin_features(X, self.spec.params.get("max_bins", DEFAULT_MAX_BINS))
        Y = one_hot(codes, k)
        F = np.zeros((n, k))
        self.rounds_ = []
        self.train_loss_ = []
        for _ in range(n_rounds):
            P = softmax(F)
            self.train_loss_.append(_cross_entropy(P, codes))
            stage: list[FittedTree] = []
            for c in range(k):
                residual = Y[:, c] - P[:, c]
                hessian = P[:, c] * (1.0 - P[:, c])
                tree, leaf_of_row = grow_tree(table, "variance", residual, params)
                # Damped Newton step per leaf.
                num = np.bincount(leaf_of_row, weights=residual, minlength=tree.n_nodes)
                den = np.bincount(leaf_of_row, weights=hessian, minlength=tree.n_nodes)
                tree.value = (num / np.maximum(den, _EPS))[:, None]
                stage.append(tree)
                F[:, c] += lr * tree.value[leaf_of_row, 0]
            self.rounds_.append(stage)
        self.train_loss_.append(_cross_entropy(softmax(F), codes))
        self._d = d
        return self

    def _scores(self, X: np.ndarray, n_rounds: int | None = None) -> np.ndarray:
        k = len(self.classes_)
        lr = self.spec.params.get("learning_rate", 0.1)
        F = np.zeros((X.shape[0], k))
        use = self.rounds_ if n_rounds is None else self.rounds_[:n_rounds]
        for stage in use:
            for c, tree in enumerate(stage):
                F[:, c] += lr * tree.predict_value(X)[:, 0]
        return F

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.rounds_:
            raise ValueError("classifier is not fitted")
        X = self._check_predict_input(X, self._d)
        return softmax(self._scores(X))

    def staged_proba(self, X: np.ndarray, stages: list[int]) -> list[np.ndarray]:
        if not self.rounds_:
            raise ValueError("classifier is not fitted")
        X = self._check_predict_input(X, self._d)
        k = len(self.classes_)
        lr = self.spec.params.get("learning_rate", 0.1)
        F = np.zeros((X.shape[0], k))
        out = []
        stage_iter = iter(sorted(stages))
        target = next(stage_iter, None)
        for t, stage in enumerate(self.rounds_, start=1):
            for c, tree in enumerate(stage):
                F[:, c] += lr * tree.predict_value(X)[:, 0]
            while target is not None and t == min(target, len(self.rounds_)):
                out.append(softmax(F))
                target = next(stage_iter, None)
        while target is not None:
            out.append(softmax(F))
            target = next(stage_iter, None)
        return out


def _cross_entropy(P: np.ndarray, codes: np.ndarray) -> float:
    p = np.clip(P[np.arange(codes.shape[0]), codes], 1e-300, None)
    return float(-np.mean(np.log(p)))


class AdaBoost(BaseClassifier):
    """SAMME multi-class boosting over shallow CART trees.

    Boosting stops before adding a learner whose weighted error reaches
    1 - 1/K; a perfect learner is kept and ends the loop.
    """

    def __init__(self, spec: ClassifierSpec):
        super().__init__(spec)
        self.trees_: list[FittedTree] = []
        self.alphas_: list[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "AdaBoost":
        X, y = check_training_inputs(X, y)
        codes = self._encode(y)
        n, d = X.shape
        k = len(self.classes_)
        n_estimators = self.spec.params.get("n_estimators", 100)
        depth = self.spec.params.get("base_depth", 1)
        params = TreeParams(max_depth=depth)
        table = bin_features(X, self.spec.params.get("max_bins", DEFAULT_MAX_BINS))
        w = np.full(n, 1.0 / n)
        self.trees_ = []
        self.alphas_ = []
        for _ in range(n_estimators):
            tree, leaf_of_row = grow_tree(
                table, "gini", codes, params, n_classes=k, sample_weight=w
            )
            pred = np.argmax(tree.value[leaf_of_row], axis=1)
            miss = pred != codes
            err = float(w[miss].sum())
            # At err == 1 - 1/K the SAMME vote weight is exactly zero, so
            # the tolerance only drops useless learners.
            if err >= 1.0 - 1.0 / k - 1e-12:
                break
            if err < _EPS:
                # Perfect learner: dominate the vote and stop.
                self.trees_.append(tree)
                self.alphas_.append(np.log((1.0 - _EPS) / _EPS) + np.log(k - 1.0))
                break
            alpha = np.log((1.0 - err) / err) + np.log(k - 1.0)
            self.trees_.append(tree)
            self.alphas_.append(alpha)
            w = w * np.exp(alpha * miss)
            w = w / w.sum()
        self._d = d
        return self

    def _votes(self, X: np.ndarray, n_members: int | None = None) -> np.ndarray:
        votes = np.zeros((X.shape[0], len(self.classes_)))
        use = len(self.trees_) if n_members is None else min(n_members, len(self.trees_))
        for tree, alpha in zip(self.trees_[:use], self.alphas_[:use]):
            pred = np.argmax(tree.predict_value(X), axis=1)
            votes[np.arange(X.shape[0]), pred] += alpha
        return votes

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.classes_ is None:
            raise ValueError("classifier is not fitted")
        X = self._check_predict_input(X, self._d)
        return normalize_rows(self._votes(X))

    def staged_proba(self, X: np.ndarray, stages: list[int]) -> list[np.ndarray]:
        if self.classes_ is None:
            raise ValueError("classifier is not fitted")
        X = self._check_predict_input(X, self._d)
        return [normalize_rows(self._votes(X, t)) for t in stages]
