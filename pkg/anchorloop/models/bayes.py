from __future__ import annotations

from typing import Any, Dict, Optional

import numpy as np
from scipy.special import logsumexp

from ..errors import MatcherError
from .base import MatchModel, check_training_arrays

VAR_SMOOTHING = 1e-9


class GaussianBayesModel(MatchModel):
    """Gaussian naive Bayes over the two labels."""

    algorithm = "bayes"

    def __init__(self, n_features: int) -> None:
        super().__init__(n_features)
        self._means: Optional[np.ndarray] = None
        self._vars: Optional[np.ndarray] = None
        self._log_priors: Optional[np.ndarray] = None

    def fit(self, features: np.ndarray, labels: np.ndarray) -> "GaussianBayesModel":
        check_training_arrays(features, labels, self.n_features)
        # variance floor scales with the spread of the whole feature matrix
        epsilon = VAR_SMOOTHING * max(float(features.var(axis=0).max()), 1e-12)
        means, variances, priors = [], [], []
        for label in (0, 1):
            rows = features[labels == label]
            if rows.shape[0] == 0:
                raise MatcherError("degenerate training set")
            means.append(rows.mean(axis=0))
            variances.append(rows.var(axis=0) + epsilon)
            priors.append(rows.shape[0] / features.shape[0])
        self._means = np.vstack(means)
        self._vars = np.vstack(variances)
        self._log_priors = np.log(np.asarray(priors))
        return self

    def _joint_log_likelihood(self, features: np.ndarray) -> np.ndarray:
        assert self._means is not None and self._vars is not None and self._log_priors is not None
        columns = []
        for label in (0, 1):
            var = self._vars[label]
            diff = features - self._means[label]
            log_lik = -0.5 * np.sum(np.log(2.0 * np.pi * var)) - 0.5 * np.sum(diff**2 / var, axis=1)
            columns.append(self._log_priors[label] + log_lik)
        return np.column_stack(columns)

    def _score_rows(self, features: np.ndarray) -> np.ndarray:
        if self._means is None:
            raise MatcherError("bayes model is not fitted")
        joint = self._joint_log_likelihood(features)
        return np.exp(joint[:, 1] - logsumexp(joint, axis=1))

    def to_params(self) -> Dict[str, Any]:
        if self._means is None or self._vars is None or self._log_priors is None:
            raise MatcherError("bayes model is not fitted")
        return {
            "means": self._means.tolist(),
            "variances": self._vars.tolist(),
            "log_priors": self._log_priors.tolist(),
        }

    @classmethod
    def from_params(cls, n_features: int, params: Dict[str, Any]) -> "GaussianBayesModel":
        model = cls(n_features)
        model._means = np.asarray(params["means"], dtype=float)
        model._vars = np.asarray(params["variances"], dtype=float)
        model._log_priors = np.asarray(params["log_priors"], dtype=float)
        if model._means.shape != (2, n_features) or model._vars.shape != (2, n_features):
            raise MatcherError("bayes parameters do not match the feature count")
        return model
