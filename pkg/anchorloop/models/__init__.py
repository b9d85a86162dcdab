from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Type

from ..errors import MatcherError
from .base import MatchModel
from .bayes import GaussianBayesModel
from .knn import KNNModel
from .logistic import LogisticModel

MODEL_FILE_VERSION = 1

ALGORITHMS: Dict[str, Type[MatchModel]] = {
    KNNModel.algorithm: KNNModel,
    GaussianBayesModel.algorithm: GaussianBayesModel,
    LogisticModel.algorithm: LogisticModel,
}


def make_model(algorithm: str, n_features: int = 5) -> MatchModel:
    try:
        cls = ALGORITHMS[algorithm]
    except KeyError:
        raise MatcherError(
            f"unknown algorithm '{algorithm}'; choose one of {sorted(ALGORITHMS)}"
        ) from None
    return cls(n_features)


def save_model(model: MatchModel, path: Path) -> None:
    payload = {
        "version": MODEL_FILE_VERSION,
        "algorithm": model.algorithm,
        "n_features": model.n_features,
        "params": model.to_params(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")


def load_model(path: Path) -> MatchModel:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MatcherError(f"model file {path} is not valid JSON: {exc}") from exc
    if payload.get("version") != MODEL_FILE_VERSION:
        raise MatcherError(
            f"model file version {payload.get('version')!r} is not supported (expected {MODEL_FILE_VERSION})"
        )
    algorithm = payload.get("algorithm")
    if algorithm not in ALGORITHMS:
        raise MatcherError(f"unknown algorithm '{algorithm}' in model file")
    return ALGORITHMS[algorithm].from_params(int(payload["n_features"]), payload["params"])


__all__ = [
    "ALGORITHMS",
    "MODEL_FILE_VERSION",
    "MatchModel",
    "KNNModel",
    "GaussianBayesModel",
    "LogisticModel",
    "make_model",
    "save_model",
    "load_model",
]
