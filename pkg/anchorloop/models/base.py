from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, ClassVar, Dict

import numpy as np

from ..errors import MatcherError


class MatchModel(ABC):
    """
    Small abstraction so the association step can swap classifiers without changes.
    Implementations must be immutable after `fit` and score deterministically.
    """

    algorithm: ClassVar[str] = ""

    def __init__(self, n_features: int) -> None:
        if n_features not in (4, 5):
            raise MatcherError(f"feature count must be 4 or 5, got {n_features}")
        self.n_features = n_features

    @abstractmethod
    def fit(self, features: np.ndarray, labels: np.ndarray) -> "MatchModel":
        ...

    @abstractmethod
    def _score_rows(self, features: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def to_params(self) -> Dict[str, Any]:
        ...

    @classmethod
    @abstractmethod
    def from_params(cls, n_features: int, params: Dict[str, Any]) -> "MatchModel":
        ...

    def score(self, features: np.ndarray) -> np.ndarray:
        """Match scores in [0,1] for an (m, n_features) array or one row."""
        rows = np.atleast_2d(np.asarray(features, dtype=float))
        if rows.shape[1] != self.n_features:
            raise MatcherError(
                f"model expects {self.n_features} features, got {rows.shape[1]}"
            )
        return np.clip(self._score_rows(rows), 0.0, 1.0)

    def predict_labels(self, features: np.ndarray) -> np.ndarray:
        return (self.score(features) >= 0.5).astype(int)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n_features={self.n_features})"


def check_training_arrays(features: np.ndarray, labels: np.ndarray, n_features: int) -> None:
    if features.ndim != 2 or features.shape[1] != n_features:
        raise MatcherError(f"training features must have shape (m, {n_features})")
    if labels.shape != (features.shape[0],):
        raise MatcherError("one label per training row is required")
