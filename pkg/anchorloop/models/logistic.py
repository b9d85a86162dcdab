from __future__ import annotations

from typing import Any, Dict

import numpy as np
from scipy.special import expit
from sklearn.preprocessing import StandardScaler

from ..errors import MatcherError
from .base import MatchModel, check_training_arrays

LEARNING_RATE = 0.5
EPOCHS = 4000


class LogisticModel(MatchModel):
    """
    Logistic regression trained by full-batch gradient descent from zero weights.
    Features are standardised with the training mean and spread, which are saved
    with the weights.
    """

    algorithm = "logistic"

    def __init__(self, n_features: int, learning_rate: float = LEARNING_RATE, epochs: int = EPOCHS) -> None:
        super().__init__(n_features)
        if learning_rate <= 0.0 or epochs < 1:
            raise MatcherError("learning rate and epochs must be positive")
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.weights = np.zeros(n_features, dtype=float)
        self.bias = 0.0
        self.mean = np.zeros(n_features, dtype=float)
        self.scale = np.ones(n_features, dtype=float)

    def fit(self, features: np.ndarray, labels: np.ndarray) -> "LogisticModel":
        check_training_arrays(features, labels, self.n_features)
        # constant columns get scale 1 and stay at zero after centring
        scaler = StandardScaler().fit(features)
        self.mean = scaler.mean_
        self.scale = scaler.scale_
        standard = scaler.transform(features)

        weights = np.zeros(self.n_features, dtype=float)
        bias = 0.0
        m = standard.shape[0]
        y = labels.astype(float)
        for _ in range(self.epochs):
            residual = expit(standard @ weights + bias) - y
            weights -= self.learning_rate * (standard.T @ residual) / m
            bias -= self.learning_rate * float(residual.sum()) / m
        self.weights = weights
        self.bias = bias
        return self

    def _score_rows(self, features: np.ndarray) -> np.ndarray:
        return expit(((features - self.mean) / self.scale) @ self.weights + self.bias)

    def to_params(self) -> Dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
        }

    @classmethod
    def from_params(cls, n_features: int, params: Dict[str, Any]) -> "LogisticModel":
        model = cls(
            n_features,
            learning_rate=float(params.get("learning_rate", LEARNING_RATE)),
            epochs=int(params.get("epochs", EPOCHS)),
        )
        arrays = {
            name: np.asarray(params.get(name, default), dtype=float)
            for name, default in (("weights", None), ("mean", [0.0] * n_features), ("scale", [1.0] * n_features))
        }
        for name, values in arrays.items():
            if values.shape != (n_features,):
                raise MatcherError(f"logistic {name} do not match the feature count")
        if np.any(arrays["scale"] <= 0.0):
            raise MatcherError("logistic scale must be positive")
        model.weights = arrays["weights"]
        model.mean = arrays["mean"]
        model.scale = arrays["scale"]
        model.bias = float(params["bias"])
        return model
