from __future__ import annotations

from typing import Any, Dict, Optional

import numpy as np

from ..errors import MatcherError
from .base import MatchModel, check_training_arrays


class KNNModel(MatchModel):
    """k nearest neighbours over the similarity vector; the score is the match fraction."""

    algorithm = "knn"

    def __init__(self, n_features: int, k: int = 3) -> None:
        super().__init__(n_features)
        if k < 1:
            raise MatcherError("k must be >= 1")
        self.k = k
        self._points: Optional[np.ndarray] = None
        self._labels: Optional[np.ndarray] = None

    def fit(self, features: np.ndarray, labels: np.ndarray) -> "KNNModel":
        check_training_arrays(features, labels, self.n_features)
        self._points = np.array(features, dtype=float)
        self._labels = np.array(labels, dtype=float)
        self._points.setflags(write=False)
        self._labels.setflags(write=False)
        return self

    def _score_rows(self, features: np.ndarray) -> np.ndarray:
        if self._points is None or self._labels is None:
            raise MatcherError("knn model is not fitted")
        k = min(self.k, self._points.shape[0])
        scores = np.empty(features.shape[0], dtype=float)
        for i, row in enumerate(features):
            dist = np.linalg.norm(self._points - row, axis=1)
            # stable sort: equal distances resolve to the earlier training row
            nearest = np.argsort(dist, kind="stable")[:k]
            scores[i] = self._labels[nearest].mean()
        return scores

    def to_params(self) -> Dict[str, Any]:
        if self._points is None or self._labels is None:
            raise MatcherError("knn model is not fitted")
        return {
            "k": self.k,
            "points": self._points.tolist(),
            "labels": self._labels.astype(int).tolist(),
        }

    @classmethod
    def from_params(cls, n_features: int, params: Dict[str, Any]) -> "KNNModel":
        model = cls(n_features, k=int(params["k"]))
        return model.fit(np.asarray(params["points"], dtype=float), np.asarray(params["labels"], dtype=float))
