"""k-nearest-neighbor classification with Euclidean distances."""

from __future__ import annotations

import numpy as np

from .base import BaseClassifier, check_training_inputs


class KNearestNeighbor(BaseClassifier):
    """Stores the training set; votes among the k closest rows.

    Distance ties resolve toward the lower training-row index; vote ties
    toward the lower class code. A k beyond the training size degrades to
    voting over the whole set.
    """

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KNearestNeighbor":
        X, y = check_training_inputs(X, y)
        self._codes = self._encode(y)
        self._X = X
        self._sq = (X * X).sum(axis=1)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.classes_ is None:
            raise ValueError("classifier is not fitted")
        X = self._check_predict_input(X, self._X.shape[1])
        k = min(int(self.spec.params.get("k", 5)), self._X.shape[0])
        d2 = self._sq[None, :] - 2.0 * (X @ self._X.T) + (X * X).sum(axis=1)[:, None]
        np.maximum(d2, 0.0, out=d2)
        if k < self._X.shape[0]:
            # Stable full sort keeps distance ties in training-row order.
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        else:
            nearest = np.broadcast_to(np.arange(self._X.shape[0]), (X.shape[0], self._X.shape[0]))
        votes = self._codes[nearest]
        counts = np.zeros((X.shape[0], len(self.classes_)))
        for c in range(len(self.classes_)):
            counts[:, c] = (votes == c).sum(axis=1)
        return counts / k
