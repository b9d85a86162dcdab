from __future__ import annotations

from typing import Any, Callable, Dict, Optional, Sequence

import pytest

from anchorloop.models import MatchModel
from anchorloop.percepts import Percept, peaked_histogram

PerceptFactory = Callable[..., Percept]


def percept(
    category: str = "cup",
    position: Sequence[float] = (0.0, 0.0, 0.0),
    t: float = 0.0,
    confidence: float = 0.9,
    size: Sequence[float] = (0.1, 0.1, 0.1),
    peak: int = 0,
    hist: Optional[Sequence[float]] = None,
) -> Percept:
    return Percept(
        category=category,
        confidence=confidence,
        color_hist=tuple(hist) if hist is not None else peaked_histogram({peak: 0.5, 16 + peak: 0.25, 32 + peak: 0.25}),
        size_box=tuple(size),  # type: ignore[arg-type]
        position=tuple(position),  # type: ignore[arg-type]
        timestamp=t,
    )


class PositionModel(MatchModel):
    """Scores a pair by its position similarity alone."""

    algorithm = "position"

    def fit(self, features, labels):
        return self

    def _score_rows(self, features):
        return features[:, 2]

    def to_params(self) -> Dict[str, Any]:
        return {}

    @classmethod
    def from_params(cls, n_features, params):
        return cls(n_features)


class ClassPositionModel(PositionModel):
    """Position similarity, zeroed when the categories differ."""

    algorithm = "class-position"

    def _score_rows(self, features):
        return features[:, 0] * features[:, 2]


@pytest.fixture
def make_percept() -> PerceptFactory:
    return percept
