"""
Percepts, their attributes, and the five pairwise similarity measures used by the matcher.

All functions are pure; inputs are treated as immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

from .errors import PerceptError

HIST_BINS_PER_CHANNEL = 16
HIST_BINS = 3 * HIST_BINS_PER_CHANNEL
NORMALIZATION_TOL = 1e-9
DEGENERATE_EPS = 1e-12

Vector3 = Tuple[float, float, float]
ClassAttribute = Tuple[str, float]


def _as_vector3(values: Iterable[float], name: str) -> Vector3:
    vec = tuple(float(v) for v in values)
    if len(vec) != 3:
        raise PerceptError(f"{name} must have 3 components, got {len(vec)}")
    if not all(math.isfinite(v) for v in vec):
        raise PerceptError(f"{name} must be finite")
    return vec  # type: ignore[return-value]


@dataclass(frozen=True)
class Percept:
    """One segmented observation of an object at time `timestamp`."""

    category: str
    confidence: float
    color_hist: Tuple[float, ...]
    size_box: Vector3
    position: Vector3
    timestamp: float

    def __post_init__(self) -> None:
        if not self.category:
            raise PerceptError("category label must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise PerceptError(f"confidence must lie in [0,1], got {self.confidence}")
        hist = tuple(float(v) for v in self.color_hist)
        if len(hist) < 2:
            raise PerceptError("color histogram needs at least 2 bins")
        if min(hist) < 0.0 or abs(math.fsum(hist) - 1.0) > NORMALIZATION_TOL:
            raise PerceptError("color histogram must be non-negative and sum to 1")
        size = _as_vector3(self.size_box, "size_box")
        if min(size) <= 0.0:
            raise PerceptError("degenerate box")
        object.__setattr__(self, "color_hist", hist)
        object.__setattr__(self, "size_box", size)
        object.__setattr__(self, "position", _as_vector3(self.position, "position"))
        object.__setattr__(self, "timestamp", float(self.timestamp))

    @property
    def class_attr(self) -> ClassAttribute:
        return (self.category, self.confidence)

    def to_dict(self) -> Dict[str, object]:
        return {
            "category": self.category,
            "confidence": self.confidence,
            "color_hist": list(self.color_hist),
            "size_box": list(self.size_box),
            "position": list(self.position),
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "Percept":
        return cls(
            category=str(data["category"]),
            confidence=float(data["confidence"]),  # type: ignore[arg-type]
            color_hist=tuple(data["color_hist"]),  # type: ignore[arg-type]
            size_box=tuple(data["size_box"]),  # type: ignore[arg-type]
            position=tuple(data["position"]),  # type: ignore[arg-type]
            timestamp=float(data["timestamp"]),  # type: ignore[arg-type]
        )


def check_category(symbol: str, vocabulary: Sequence[str]) -> str:
    if not symbol or symbol not in vocabulary:
        raise PerceptError(f"unknown category label '{symbol}'")
    return symbol


def normalize_histogram(values: Iterable[float]) -> Tuple[float, ...]:
    arr = np.clip(np.asarray(list(values), dtype=float), 0.0, None)
    total = arr.sum()
    if total <= 0.0:
        raise PerceptError("cannot normalize an all-zero histogram")
    arr = arr / total
    # push the rounding residue into the largest bin so fsum is exactly 1 within tolerance
    arr[int(np.argmax(arr))] += 1.0 - math.fsum(arr)
    return tuple(float(v) for v in arr)


def class_similarity(x: ClassAttribute, y: ClassAttribute) -> float:
    label_x, conf_x = x
    label_y, conf_y = y
    if label_x != label_y:
        return 0.0
    denom = conf_x + conf_y
    if denom < DEGENERATE_EPS:
        return 1.0
    return math.exp(-abs(conf_x - conf_y) / denom)


def color_similarity(hx: Sequence[float], hy: Sequence[float]) -> float:
    ax = np.asarray(hx, dtype=float)
    ay = np.asarray(hy, dtype=float)
    if ax.shape != ay.shape:
        raise PerceptError("histogram dimension mismatch")
    if ax.size < 2:
        raise PerceptError("histogram needs at least 2 bins")
    if ax.var() < DEGENERATE_EPS or ay.var() < DEGENERATE_EPS:
        return 0.5
    dx = ax - ax.mean()
    dy = ay - ay.mean()
    pearson = float(np.dot(dx, dy) / math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy))))
    return min(1.0, max(0.0, 0.5 * (1.0 + pearson)))


def position_similarity(px: Sequence[float], py: Sequence[float]) -> float:
    diff = np.asarray(px, dtype=float) - np.asarray(py, dtype=float)
    return math.exp(-float(np.linalg.norm(diff)))


def size_similarity(sx: Sequence[float], sy: Sequence[float]) -> float:
    ax = np.asarray(sx, dtype=float)
    ay = np.asarray(sy, dtype=float)
    if ax.shape != (3,) or ay.shape != (3,):
        raise PerceptError("size boxes must have 3 extents")
    if ax.min() <= 0.0 or ay.min() <= 0.0:
        raise PerceptError("degenerate box")
    return float(np.minimum(ax, ay).sum() / np.maximum(ax, ay).sum())


def time_similarity(t_now: float, t_last: float) -> float:
    k = t_now - t_last
    if k < 0:
        raise PerceptError("non-monotonic timestamps")
    # 2/(1+e^k) written in the overflow-free form
    decay = math.exp(-k)
    return 2.0 * decay / (1.0 + decay)


@dataclass(frozen=True)
class GroundingTable:
    """Predicate grounding for color: histogram bin index -> color predicate symbol."""

    symbols: Tuple[str, ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, str], n_bins: int = HIST_BINS) -> "GroundingTable":
        missing = [i for i in range(n_bins) if i not in mapping]
        if missing:
            raise PerceptError(f"grounding table is not total; missing bins {missing[:5]}")
        return cls(tuple(mapping[i] for i in range(n_bins)))

    @classmethod
    def default(cls) -> "GroundingTable":
        """Hue-family names for the hue channel; saturation and value bins ground to tones."""
        hues = (
            "red", "red", "orange", "yellow", "yellow", "green", "green", "green",
            "cyan", "cyan", "blue", "blue", "blue", "purple", "magenta", "red",
        )
        saturation = ("gray",) * 4 + ("pale",) * 6 + ("vivid",) * 6
        value = ("black",) * 4 + ("dark",) * 4 + ("medium",) * 4 + ("bright",) * 4
        return cls(hues + saturation + value)

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, index: int) -> str:
        return self.symbols[index]


def ground_color_predicate(hist: Sequence[float], table: GroundingTable) -> str:
    arr = np.asarray(hist, dtype=float)
    if arr.size != len(table):
        raise PerceptError("histogram dimension mismatch")
    # np.argmax returns the first maximum, i.e. the lowest bin index on ties
    return table[int(np.argmax(arr))]


SIZE_PREDICATES: Tuple[Tuple[float, str], ...] = (
    (1.5e-4, "small"),
    (1.5e-3, "medium"),
)


def ground_size_predicate(size_box: Sequence[float]) -> str:
    volume = float(np.prod(np.asarray(size_box, dtype=float)))
    if volume <= 0.0:
        raise PerceptError("degenerate box")
    for upper, symbol in SIZE_PREDICATES:
        if volume < upper:
            return symbol
    return "large"


def peaked_histogram(peaks: Mapping[int, float], n_bins: int = HIST_BINS, floor: float = 0.002) -> Tuple[float, ...]:
    """Build a normalized histogram with mass concentrated on the given bins."""
    arr = np.full(n_bins, floor, dtype=float)
    for index, mass in peaks.items():
        if not 0 <= index < n_bins:
            raise PerceptError(f"bin {index} outside histogram of {n_bins} bins")
        arr[index] += mass
    return normalize_histogram(arr)
