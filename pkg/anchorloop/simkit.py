"""
Scenario engine: scripted ground-truth timelines, synthetic percepts, matcher datasets
and run metrics.
"""

from __future__ import annotations

import functools
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .anchorstore import Anchor
from .config import DEFAULT_VOCABULARY, AnchorloopConfig
from .errors import AnchorloopError, DatasetError, ScenarioError
from .matcher import LabeledSample, TrainingReport, build_similarity_vector, train
from .models import MatchModel
from .percepts import NORMALIZATION_TOL, Percept, normalize_histogram
from .rpf import TrackerConfig
from .trace import TraceWriter
from .worldloop import FrameInput, FrameReport, WorldLoop

logger = logging.getLogger(__name__)

DEFAULT_DATASET_SIZE = 5400
MIN_DATASET_SIZE = 10
MAX_REPLAY_STRIDE = 3
DEFAULT_MATCHER: Tuple[str, int] = ("knn", 5)
# position error of a tracked stand-in for a hidden object
TRACKED_PROXY_SIGMA = 0.03


@dataclass(frozen=True)
class SameLookPair:
    """Recipe for a pair against a same-looking anchor displaced in space and time."""

    label: int
    rate: float
    gap: Tuple[float, float]
    distance: Tuple[float, float]


SAME_LOOK_PAIRS: Dict[str, SameLookPair] = {
    # the object itself, moved while out of view
    "relocated": SameLookPair(label=1, rate=0.2, gap=(2.0, 4.0), distance=(0.25, 0.5)),
    # an identical object seen moments ago; nothing moves that far between frames
    "twin": SameLookPair(label=0, rate=0.2, gap=(0.5, 1.5), distance=(0.25, 0.5)),
    # an identical object last seen long ago and far away
    "stale": SameLookPair(label=0, rate=0.15, gap=(2.0, 10.0), distance=(0.8, 1.6)),
}


class NoiseSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sigma_pos: float = Field(default=0.01, ge=0.0)
    sigma_size: float = Field(default=0.05, ge=0.0)
    hist_concentration: Optional[float] = Field(default=200.0, gt=0.0)
    confidence_range: Tuple[float, float] = (0.6, 0.99)
    label_flip: float = Field(default=0.0, ge=0.0, le=1.0)

    @field_validator("confidence_range")
    @classmethod
    def _ordered(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not 0.0 <= low <= high <= 1.0:
            raise ValueError("confidence range must satisfy 0 <= low <= high <= 1")
        return value

    @classmethod
    def exact(cls) -> "NoiseSpec":
        return cls(sigma_pos=0.0, sigma_size=0.0, hist_concentration=None, confidence_range=(1.0, 1.0))


class ObjectSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    category: str
    color_hist: List[float]
    size_box: Tuple[float, float, float]

    @field_validator("color_hist")
    @classmethod
    def _normalized(cls, value: List[float]) -> List[float]:
        if len(value) < 2 or min(value) < 0.0 or abs(sum(value) - 1.0) > NORMALIZATION_TOL:
            raise ValueError("canonical histogram must be non-negative and sum to 1")
        return value


class ObjectState(BaseModel):
    model_config = ConfigDict(extra="forbid")

    position: Tuple[float, float, float]
    visible: bool = True
    attached_to: Optional[str] = None


class FrameSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: float
    objects: Dict[str, ObjectState]


class Scenario(BaseModel):
    """Ground-truth timeline; every object has a state in every frame."""

    model_config = ConfigDict(extra="forbid")

    name: str
    objects: List[ObjectSpec]
    frames: List[FrameSpec]
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    focus: Optional[str] = None

    @model_validator(mode="after")
    def _consistent(self) -> "Scenario":
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique")
        if not self.frames:
            raise ValueError("a scenario needs at least one frame")
        if self.focus is not None and self.focus not in ids:
            raise ValueError(f"focus '{self.focus}' is not a scenario object")
        previous: Optional[FrameSpec] = None
        for frame in self.frames:
            if set(frame.objects) != set(ids):
                raise ValueError(f"frame t={frame.t} must list every object exactly once")
            if previous is not None and frame.t <= previous.t:
                raise ValueError("frame times must increase strictly")
            for oid, state in frame.objects.items():
                host = state.attached_to
                if host is None:
                    continue
                if host not in frame.objects or host == oid:
                    raise ValueError(f"'{oid}' is attached to unknown host '{host}'")
                if previous is not None and previous.objects[oid].attached_to == host:
                    before = np.subtract(previous.objects[oid].position, previous.objects[host].position)
                    now = np.subtract(state.position, frame.objects[host].position)
                    if not np.allclose(before, now, atol=1e-9):
                        raise ValueError(f"'{oid}' does not keep a constant offset to '{host}' at t={frame.t}")
            previous = frame
        return self

    def spec(self, object_id: str) -> ObjectSpec:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise ScenarioError(f"unknown scenario object '{object_id}'")

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


def load_scenario(path: Path) -> Scenario:
    try:
        return Scenario.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise ScenarioError(f"invalid scenario {path}: {exc}") from exc


def save_scenario(scenario: Scenario, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(scenario.to_json(), encoding="utf-8")


@dataclass(frozen=True)
class GroundTruth:
    frame_index: int
    t: float
    percept_ids: Tuple[str, ...]
    positions: Dict[str, Tuple[float, float, float]]
    hidden: Tuple[str, ...]
    hosts: Dict[str, Optional[str]]


def frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    """Per-frame stream derived from the run seed, independent of generation order."""
    return np.random.default_rng([seed, frame_index])


def _render(
    obj: ObjectSpec,
    position: Sequence[float],
    t: float,
    noise: NoiseSpec,
    rng: np.random.Generator,
    vocabulary: Sequence[str],
) -> Percept:
    """One noisy percept of `obj` at `position`."""
    centre = np.asarray(position, dtype=float)
    if noise.sigma_pos > 0.0:
        centre = centre + rng.normal(0.0, noise.sigma_pos, size=3)
    size = np.asarray(obj.size_box, dtype=float)
    if noise.sigma_size > 0.0:
        size = np.maximum(size * (1.0 + rng.normal(0.0, noise.sigma_size, size=3)), 1e-4)
    hist: Sequence[float] = obj.color_hist
    if noise.hist_concentration is not None:
        alpha = noise.hist_concentration * np.asarray(obj.color_hist) + 1e-6
        hist = normalize_histogram(rng.dirichlet(alpha))
    low, high = noise.confidence_range
    confidence = low if low == high else float(rng.uniform(low, high))
    category = obj.category
    if noise.label_flip > 0.0 and rng.random() < noise.label_flip:
        others = [c for c in vocabulary if c != category]
        if others:
            category = others[int(rng.integers(len(others)))]
    return Percept(
        category=category,
        confidence=confidence,
        color_hist=tuple(hist),
        size_box=tuple(size),  # type: ignore[arg-type]
        position=tuple(centre),  # type: ignore[arg-type]
        timestamp=t,
    )


def generate_frame(
    scenario: Scenario,
    frame_index: int,
    rng: np.random.Generator,
    vocabulary: Sequence[str] = DEFAULT_VOCABULARY,
) -> Tuple[List[Percept], GroundTruth]:
    """One noisy percept per visible object, in random order, plus the matching ground truth."""
    if not 0 <= frame_index < len(scenario.frames):
        raise ScenarioError(f"frame index {frame_index} outside 0..{len(scenario.frames) - 1}")
    frame = scenario.frames[frame_index]
    percepts: List[Percept] = []
    owners: List[str] = []
    for obj in scenario.objects:
        state = frame.objects[obj.id]
        if not state.visible:
            continue
        percepts.append(_render(obj, state.position, frame.t, scenario.noise, rng, vocabulary))
        owners.append(obj.id)

    order = rng.permutation(len(percepts))
    truth = GroundTruth(
        frame_index=frame_index,
        t=frame.t,
        percept_ids=tuple(owners[i] for i in order),
        positions={oid: tuple(s.position) for oid, s in frame.objects.items()},  # type: ignore[misc]
        hidden=tuple(oid for oid, s in frame.objects.items() if not s.visible),
        hosts={oid: s.attached_to for oid, s in frame.objects.items() if not s.visible},
    )
    return [percepts[i] for i in order], truth


def label_balance(samples: Iterable[LabeledSample]) -> Dict[str, int]:
    labels = [s.label for s in samples]
    return {"positives": sum(labels), "negatives": len(labels) - sum(labels)}


def generate_matcher_dataset(
    scenarios: Sequence[Scenario],
    rng: np.random.Generator,
    n_target: int = DEFAULT_DATASET_SIZE,
) -> List[LabeledSample]:
    """
    Replay scenarios with annotation anchors (one per true object) and emit one positive per
    true continuation and a negative against every other anchor. Hidden objects keep a
    tracked stand-in position: their true position plus tracking noise. Replays skip frames
    with a random stride so time gaps vary.

    Each percept may also be paired with a same-looking anchor displaced in space and time
    (see `SAME_LOOK_PAIRS`). These pairs only differ in the time gap, which is what gives
    the time feature something to learn.
    """
    if n_target < MIN_DATASET_SIZE:
        raise DatasetError(f"n_target must be at least {MIN_DATASET_SIZE}, got {n_target}")
    if not scenarios:
        raise ScenarioError("no scenarios to replay")
    samples: List[LabeledSample] = []
    while len(samples) < n_target:
        before = len(samples)
        for scenario in scenarios:
            stride = int(rng.integers(1, MAX_REPLAY_STRIDE + 1))
            replay_seed = int(rng.integers(2**31))
            _replay_for_dataset(scenario, stride, replay_seed, samples, n_target)
            if len(samples) >= n_target:
                break
        if len(samples) == before:
            raise ScenarioError("scenarios produce no labeled pairs; each needs an object seen twice")
    balance = label_balance(samples)
    logger.info("matcher dataset: %d samples, %s", len(samples), balance)
    return samples


def same_look_anchor(
    scenario: Scenario,
    object_id: str,
    percept: Percept,
    pair: SameLookPair,
    rng: np.random.Generator,
) -> Anchor:
    """An anchor that looks like `object_id`, last seen `pair.gap` ago `pair.distance` away."""
    gap = float(rng.uniform(*pair.gap))
    distance = float(rng.uniform(*pair.distance))
    heading = float(rng.uniform(0.0, 2.0 * np.pi))
    position = np.asarray(percept.position) + distance * np.array([np.cos(heading), np.sin(heading), 0.0])
    t_last = percept.timestamp - gap
    attributes = _render(scenario.spec(object_id), position, t_last, scenario.noise, rng, DEFAULT_VOCABULARY)
    return Anchor(id=f"{object_id}~", attributes=attributes, last_observed=t_last, last_fed=t_last)


def _replay_for_dataset(
    scenario: Scenario, stride: int, seed: int, samples: List[LabeledSample], n_target: int
) -> None:
    anchors: Dict[str, Anchor] = {}
    replay_rng = np.random.default_rng([seed, len(scenario.frames)])
    proxy_sigma = max(scenario.noise.sigma_pos, TRACKED_PROXY_SIGMA) if scenario.noise.sigma_pos > 0.0 else 0.0
    for index in range(0, len(scenario.frames), stride):
        percepts, truth = generate_frame(scenario, index, frame_rng(seed, index))
        for hidden_id in truth.hidden:
            anchor = anchors.get(hidden_id)
            if anchor is None:
                continue
            proxy = np.asarray(truth.positions[hidden_id]) + replay_rng.normal(0.0, proxy_sigma, size=3)
            anchor.attributes = replace(anchor.attributes, position=tuple(float(v) for v in proxy))
        for percept, true_id in zip(percepts, truth.percept_ids):
            for anchor_id in sorted(anchors):
                vector = build_similarity_vector(percept, anchors[anchor_id], truth.t)
                samples.append(LabeledSample(vector, int(anchor_id == true_id)))
                if len(samples) >= n_target:
                    return
            if not anchors:
                continue
            for kind in sorted(SAME_LOOK_PAIRS):
                pair = SAME_LOOK_PAIRS[kind]
                if replay_rng.random() >= pair.rate:
                    continue
                lookalike = same_look_anchor(scenario, true_id, percept, pair, replay_rng)
                samples.append(LabeledSample(build_similarity_vector(percept, lookalike, truth.t), pair.label))
                if len(samples) >= n_target:
                    return
        for percept, true_id in zip(percepts, truth.percept_ids):
            anchors[true_id] = Anchor(id=true_id, attributes=percept, last_observed=truth.t, last_fed=truth.t)


@functools.lru_cache(maxsize=8)
def default_model(
    algorithm: str = DEFAULT_MATCHER[0], n_features: int = DEFAULT_MATCHER[1], seed: int = 0
) -> Tuple[MatchModel, TrainingReport]:
    """Matcher trained on a dataset replayed from the builtin scenarios."""
    from .scenarios import builtin_scenarios

    samples = generate_matcher_dataset(list(builtin_scenarios().values()), np.random.default_rng(seed))
    return train(samples, algorithm, split_seed=seed, n_features=n_features)


class MetricsReport(BaseModel):
    scenario: str
    seed: int
    tracker: bool
    frames: int
    acquire_count: int
    id_switches: int
    occluded_rmse: Optional[float]
    host_accuracy: Optional[float]
    final_host_correct: Optional[bool]
    focus_reacquired: Optional[bool]
    matcher_accuracy: Optional[float] = None
    matcher_f1: Optional[float] = None
    passed: bool

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


def evaluate(
    reports: Sequence[FrameReport],
    truths: Sequence[GroundTruth],
    scenario: Scenario,
    seed: int = 0,
    tracker: bool = True,
    matcher: Optional[TrainingReport] = None,
) -> MetricsReport:
    if len(reports) != len(truths):
        raise ScenarioError("one ground-truth slice per frame report is required")
    history: Dict[str, List[str]] = {}
    current_anchor: Dict[str, str] = {}
    acquire_count = 0
    sq_errors: List[float] = []
    host_hits: List[bool] = []

    for report, truth in zip(reports, truths):
        acquire_count += len(report.acquired)
        for true_id, anchor_id in zip(truth.percept_ids, report.percept_anchors):
            history.setdefault(true_id, []).append(anchor_id)
            current_anchor[true_id] = anchor_id
        for hidden_id in truth.hidden:
            anchor_id = current_anchor.get(hidden_id)
            if anchor_id is None or anchor_id not in report.positions:
                continue
            if report.statuses.get(anchor_id) == "lost":
                continue
            err = np.subtract(report.positions[anchor_id], truth.positions[hidden_id])
            sq_errors.append(float(np.dot(err, err)))
            host_true = truth.hosts.get(hidden_id)
            if tracker and host_true is not None and host_true in current_anchor:
                estimate = report.estimates.get(anchor_id)
                if estimate is not None:
                    host_hits.append(estimate.host == current_anchor[host_true])

    id_switches = sum(
        sum(1 for a, b in zip(seq, seq[1:]) if a != b) for seq in history.values()
    )
    focus_reacquired: Optional[bool] = None
    if scenario.focus is not None and scenario.focus in history:
        seq = history[scenario.focus]
        focus_reacquired = all(a == seq[0] for a in seq)
    final_host_correct = host_hits[-1] if host_hits else None
    passed = id_switches == 0 and final_host_correct is not False
    return MetricsReport(
        scenario=scenario.name,
        seed=seed,
        tracker=tracker,
        frames=len(reports),
        acquire_count=acquire_count,
        id_switches=id_switches,
        occluded_rmse=float(np.sqrt(np.mean(sq_errors))) if sq_errors else None,
        host_accuracy=float(np.mean(host_hits)) if host_hits else None,
        final_host_correct=final_host_correct,
        focus_reacquired=focus_reacquired,
        matcher_accuracy=matcher.accuracy if matcher else None,
        matcher_f1=matcher.f1 if matcher else None,
        passed=passed,
    )


def run_scenario(
    scenario: Scenario,
    model: MatchModel,
    config: Optional[AnchorloopConfig] = None,
    seed: int = 0,
    tracker_config: Optional[TrackerConfig] = None,
    trace: Optional[TraceWriter] = None,
) -> Tuple[WorldLoop, List[FrameReport], List[GroundTruth]]:
    config = config or AnchorloopConfig()
    world = WorldLoop(model, config=config, seed=seed, tracker_config=tracker_config, trace=trace)
    reports: List[FrameReport] = []
    truths: List[GroundTruth] = []
    for index, frame in enumerate(scenario.frames):
        percepts, truth = generate_frame(scenario, index, frame_rng(seed, index), config.vocabulary)
        reports.append(world.step(FrameInput(frame.t, tuple(percepts))))
        truths.append(truth)
    return world, reports, truths


def aggregate(metrics: Sequence[MetricsReport]) -> Dict[str, object]:
    """Pass rates over repeated seeded runs of one scenario."""
    if not metrics:
        raise AnchorloopError("nothing to aggregate")

    def rate(values: List[Optional[bool]]) -> Optional[float]:
        known = [v for v in values if v is not None]
        return float(np.mean(known)) if known else None

    return {
        "scenario": metrics[0].scenario,
        "runs": len(metrics),
        "seeds": [m.seed for m in metrics],
        "pass_rate": rate([m.passed for m in metrics]),
        "zero_switch_rate": rate([m.id_switches == 0 for m in metrics]),
        "focus_reacquired_rate": rate([m.focus_reacquired for m in metrics]),
        "final_host_rate": rate([m.final_host_correct for m in metrics]),
        "mean_acquire_count": float(np.mean([m.acquire_count for m in metrics])),
    }


def resolve_scenario(name_or_path: Union[str, Path]) -> Scenario:
    """A builtin scenario by name, else a scenario JSON file."""
    from .scenarios import builtin_scenarios

    builtins = builtin_scenarios()
    if str(name_or_path) in builtins:
        return builtins[str(name_or_path)]
    path = Path(name_or_path)
    if not path.is_file():
        raise ScenarioError(f"'{name_or_path}' is neither a builtin scenario ({', '.join(sorted(builtins))}) nor a file")
    return load_scenario(path)
