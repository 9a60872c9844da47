"""Gaussian naive Bayes with a relative variance floor."""

from __future__ import annotations

import numpy as np

from .base import BaseClassifier, check_training_inputs


class NaiveBayes(BaseClassifier):
    """Per-class feature means/variances with frequency priors.

    Variances are floored at var_floor_ratio times the largest overall
    feature variance, guarding zero-variance features.
    """

    def fit(self, X: np.ndarray, y: np.ndarray) -> "NaiveBayes":
        X, y = check_training_inputs(X, y)
        codes = self._encode(y)
        k = len(self.classes_)
        n, d = X.shape
        ratio = float(self.spec.params.get("var_floor_ratio", 1e-9))
        self.priors_ = np.bincount(codes, minlength=k) / n
        self.means_ = np.empty((k, d))
        self.vars_ = np.empty((k, d))
        for c in range(k):
            rows = X[codes == c]
            self.means_[c] = rows.mean(axis=0)
            self.vars_[c] = rows.var(axis=0)
        max_var = float(X.var(axis=0).max())
        floor = ratio * max_var if max_var > 0 else 1e-12
        self.vars_ = np.maximum(self.vars_, floor)
        self._d = d
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.classes_ is None:
            raise ValueError("classifier is not fitted")
        X = self._check_predict_input(X, self._d)
        # Log joint per class, normalized through logsumexp.
        log_joint = np.empty((X.shape[0], len(self.classes_)))
        for c in range(len(self.classes_)):
            diff = X - self.means_[c]
            log_like = -0.5 * (np.log(2.0 * np.pi * self.vars_[c]) + diff * diff / self.vars_[c]).sum(axis=1)
            log_joint[:, c] = np.log(self.priors_[c]) + log_like
        log_joint -= log_joint.max(axis=1, keepdims=True)
        p = np.exp(log_joint)
        return p / p.sum(axis=1, keepdims=True)
