"""
Similarity vectors, match-classifier training, and winner-takes-all data association.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import accuracy_score, f1_score
from sklearn.model_selection import train_test_split

from .anchorstore import Anchor
from .errors import DatasetError, MatcherError
from .models import ALGORITHMS, MatchModel, make_model
from .percepts import (
    Percept,
    class_similarity,
    color_similarity,
    position_similarity,
    size_similarity,
    time_similarity,
)

logger = logging.getLogger(__name__)

FEATURE_NAMES: Tuple[str, ...] = ("d_class", "d_color", "d_pos", "d_size", "d_time")
DATASET_HEADER: Tuple[str, ...] = FEATURE_NAMES + ("label",)
TRAIN_FRACTION_TENTHS = 7


@dataclass(frozen=True)
class SimilarityVector:
    d_class: float
    d_color: float
    d_pos: float
    d_size: float
    d_time: float

    def __post_init__(self) -> None:
        for name in FEATURE_NAMES:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise MatcherError(f"{name} must lie in [0,1], got {value}")

    def as_array(self, n_features: int = 5) -> np.ndarray:
        """The first `n_features` components; 4 drops the time feature."""
        if n_features not in (4, 5):
            raise MatcherError(f"feature count must be 4 or 5, got {n_features}")
        return np.array([getattr(self, name) for name in FEATURE_NAMES[:n_features]], dtype=float)

    def as_tuple(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)


@dataclass(frozen=True)
class LabeledSample:
    features: SimilarityVector
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise MatcherError(f"label must be 0 or 1, got {self.label!r}")


def build_similarity_vector(candidate: Percept, anchor: Anchor, t_now: float) -> SimilarityVector:
    attrs = anchor.attributes
    return SimilarityVector(
        d_class=class_similarity(candidate.class_attr, attrs.class_attr),
        d_color=color_similarity(candidate.color_hist, attrs.color_hist),
        # the anchor position may be a tracked estimate written back by the world loop
        d_pos=position_similarity(candidate.position, attrs.position),
        d_size=size_similarity(candidate.size_box, attrs.size_box),
        d_time=time_similarity(t_now, anchor.last_observed),
    )


@dataclass(frozen=True)
class TrainingReport:
    algorithm: str
    n_features: int
    accuracy: float
    f1: float
    n_train: int
    n_test: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "algorithm": self.algorithm,
            "n_features": self.n_features,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "n_train": self.n_train,
            "n_test": self.n_test,
        }


def _stack(samples: Sequence[LabeledSample], n_features: int) -> Tuple[np.ndarray, np.ndarray]:
    features = np.vstack([s.features.as_array(n_features) for s in samples])
    labels = np.array([s.label for s in samples], dtype=int)
    return features, labels


def train(
    samples: Sequence[LabeledSample],
    algorithm: str,
    split_seed: int,
    n_features: int = 5,
) -> Tuple[MatchModel, TrainingReport]:
    """Shuffle with `split_seed`, fit on 70%, report accuracy and match-F1 on the held-out 30%."""
    labels_all = [s.label for s in samples]
    for label in (0, 1):
        if labels_all.count(label) < 2:
            raise MatcherError("degenerate training set")

    n_train = (TRAIN_FRACTION_TENTHS * len(samples) + 5) // 10
    train_rows, test_rows = train_test_split(
        list(samples), train_size=n_train, test_size=len(samples) - n_train, random_state=split_seed
    )
    if len({s.label for s in train_rows}) < 2:
        raise MatcherError(f"degenerate training set: split seed {split_seed} left one label in training")

    x_train, y_train = _stack(train_rows, n_features)
    model = make_model(algorithm, n_features).fit(x_train, y_train)

    x_test, y_test = _stack(test_rows, n_features)
    predicted = model.predict_labels(x_test)
    accuracy = float(accuracy_score(y_test, predicted))
    f1 = float(f1_score(y_test, predicted, pos_label=1, zero_division=1.0))

    report = TrainingReport(
        algorithm=algorithm,
        n_features=n_features,
        accuracy=accuracy,
        f1=f1,
        n_train=len(train_rows),
        n_test=len(test_rows),
    )
    logger.info(
        "trained %s/%d: accuracy=%.4f f1=%.4f (%d/%d)",
        algorithm, n_features, accuracy, f1, report.n_train, report.n_test,
    )
    return model, report


def predict(model: MatchModel, v: Union[SimilarityVector, Sequence[float], np.ndarray]) -> float:
    if isinstance(v, SimilarityVector):
        row = v.as_array(model.n_features)
    else:
        row = np.asarray(v, dtype=float)
        if row.shape != (model.n_features,):
            raise MatcherError(
                f"dimension mismatch: model expects {model.n_features} features, got {row.size}"
            )
    return float(model.score(row)[0])


@dataclass(frozen=True)
class ReAcquire:
    anchor_id: str
    score: float

    kind = "re_acquire"

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "anchor_id": self.anchor_id, "score": self.score}


@dataclass(frozen=True)
class Acquire:
    kind = "acquire"

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind}


Decision = Union[ReAcquire, Acquire]


@dataclass(frozen=True)
class AssociationResult:
    """Decision per percept index, in percept order."""

    decisions: Tuple[Decision, ...]
    scores: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def matched(self) -> Dict[int, str]:
        return {i: d.anchor_id for i, d in enumerate(self.decisions) if isinstance(d, ReAcquire)}

    @property
    def acquired(self) -> List[int]:
        return [i for i, d in enumerate(self.decisions) if isinstance(d, Acquire)]

    def to_dict(self) -> List[Dict[str, object]]:
        return [d.to_dict() for d in self.decisions]


def score_pairs(
    percepts: Sequence[Percept], anchors: Sequence[Anchor], model: MatchModel, t_now: float
) -> np.ndarray:
    """(n_percepts, n_anchors) match scores."""
    if not percepts or not anchors:
        return np.zeros((len(percepts), len(anchors)), dtype=float)
    rows = np.vstack(
        [
            build_similarity_vector(p, a, t_now).as_array(model.n_features)
            for p in percepts
            for a in anchors
        ]
    )
    return model.score(rows).reshape(len(percepts), len(anchors))


def associate(
    percepts: Sequence[Percept],
    anchors: Sequence[Anchor],
    model: MatchModel,
    threshold: float,
    t_now: float,
) -> AssociationResult:
    """
    Winner takes all: accept pairs in descending score order while both sides are free
    and the score clears `threshold`. Equal scores prefer the smaller time gap, then
    the lexicographically smaller anchor id.
    """
    scores = score_pairs(percepts, anchors, model, t_now)
    order = sorted(
        ((i, j) for i in range(len(percepts)) for j in range(len(anchors))),
        key=lambda ij: (
            -scores[ij[0], ij[1]],
            t_now - anchors[ij[1]].last_observed,
            anchors[ij[1]].id,
            ij[0],
        ),
    )
    decisions: List[Decision] = [Acquire() for _ in percepts]
    used_percepts: set[int] = set()
    used_anchors: set[int] = set()
    for i, j in order:
        score = float(scores[i, j])
        if score < threshold:
            break
        if i in used_percepts or j in used_anchors:
            continue
        decisions[i] = ReAcquire(anchors[j].id, score)
        used_percepts.add(i)
        used_anchors.add(j)
    return AssociationResult(tuple(decisions), scores)


def _parse_row(row: List[str], line: int) -> LabeledSample:
    if len(row) != len(DATASET_HEADER):
        raise DatasetError(f"expected {len(DATASET_HEADER)} fields, got {len(row)}", line)
    try:
        values = [float(cell) for cell in row[:-1]]
        raw_label = float(row[-1])
    except ValueError as exc:
        raise DatasetError(f"non-numeric field ({exc})", line) from exc
    if raw_label not in (0.0, 1.0):
        raise DatasetError(f"label must be 0 or 1, got {row[-1]!r}", line)
    try:
        return LabeledSample(SimilarityVector(*values), int(raw_label))
    except MatcherError as exc:
        raise DatasetError(str(exc), line) from exc


def load_dataset(path: Path) -> List[LabeledSample]:
    samples: List[LabeledSample] = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        for line, row in enumerate(csv.reader(handle), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            cells = [cell.strip() for cell in row]
            if line == 1 and tuple(cells) == DATASET_HEADER:
                continue
            samples.append(_parse_row(cells, line))
    logger.debug("loaded %d samples from %s", len(samples), path)
    return samples


def save_dataset(path: Path, samples: Iterable[LabeledSample]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(DATASET_HEADER)
        for sample in samples:
            writer.writerow([format(v, ".17g") for v in sample.features.as_tuple()] + [sample.label])


@dataclass(frozen=True)
class ComparisonRow:
    algorithm: str
    n_features: int
    accuracy: float
    f1: float
    accuracies: Tuple[float, ...]

    def to_dict(self) -> Dict[str, object]:
        return {
            "algorithm": self.algorithm,
            "n_features": self.n_features,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "accuracies": list(self.accuracies),
        }


def compare_algorithms(
    samples: Sequence[LabeledSample],
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    algorithms: Optional[Sequence[str]] = None,
) -> List[ComparisonRow]:
    """Every algorithm with and without the time feature, averaged over split seeds."""
    rows: List[ComparisonRow] = []
    for algorithm in algorithms or sorted(ALGORITHMS):
        for n_features in (4, 5):
            reports = [train(samples, algorithm, seed, n_features)[1] for seed in seeds]
            accuracies = tuple(r.accuracy for r in reports)
            rows.append(
                ComparisonRow(
                    algorithm=algorithm,
                    n_features=n_features,
                    accuracy=float(np.mean(accuracies)),
                    f1=float(np.mean([r.f1 for r in reports])),
                    accuracies=accuracies,
                )
            )
    return rows
