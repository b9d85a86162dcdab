"""
The per-frame feedback loop between the anchor store (permanent world model) and the
particle ensemble (temporary world model).
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .anchorstore import AnchorStatus, AnchorStore
from .config import AnchorloopConfig
from .errors import WorldLoopError
from .matcher import Acquire, AssociationResult, ReAcquire, associate
from .models import MatchModel
from .percepts import GroundingTable, Percept, check_category
from .rpf import ObjectEstimate, ParticleEnsemble, TrackerConfig, TrackerSnapshot
from .trace import TraceWriter

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameInput:
    t: float
    percepts: Tuple[Percept, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "percepts", tuple(self.percepts))


@dataclass(frozen=True)
class OcclusionEvent:
    kind: str  # attach | detach | lost
    anchor_id: str
    hosts: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind, "anchor_id": self.anchor_id, "hosts": list(self.hosts)}


@dataclass
class FrameReport:
    t: float
    decisions: AssociationResult
    percept_anchors: List[str]
    acquired: List[str] = field(default_factory=list)
    tracked: Dict[str, Tuple[float, float, float]] = field(default_factory=dict)
    events: List[OcclusionEvent] = field(default_factory=list)
    estimates: Dict[str, ObjectEstimate] = field(default_factory=dict)
    positions: Dict[str, Tuple[float, float, float]] = field(default_factory=dict)
    statuses: Dict[str, str] = field(default_factory=dict)
    symbols: Dict[str, Dict[str, str]] = field(default_factory=dict)
    ess: Optional[float] = None
    particles: Optional[TrackerSnapshot] = None

    def to_record(self) -> Dict[str, object]:
        record: Dict[str, object] = {
            "t": self.t,
            "percepts": list(self.percept_anchors),
            "decisions": self.decisions.to_dict(),
            "statuses": dict(self.statuses),
            "tracked": {k: list(v) for k, v in sorted(self.tracked.items())},
            "estimates": {k: v.to_dict() for k, v in sorted(self.estimates.items())},
            "symbols": {k: dict(v) for k, v in sorted(self.symbols.items())},
            "events": [e.to_dict() for e in self.events],
            "ess": self.ess,
        }
        if self.particles is not None:
            record["particles"] = self.particles.to_dict()
        return record


class WorldLoop:
    """One world instance: anchor store, particle ensemble, match model and random stream."""

    def __init__(
        self,
        model: MatchModel,
        config: Optional[AnchorloopConfig] = None,
        seed: int = 0,
        tracker_config: Optional[TrackerConfig] = None,
        trace: Optional[TraceWriter] = None,
    ) -> None:
        self.config = config or AnchorloopConfig()
        self.model = model
        self.store = AnchorStore()
        self.ensemble = ParticleEnsemble(tracker_config or TrackerConfig(n_particles=self.config.particles))
        self.rng = np.random.default_rng(seed)
        self.trace = trace
        self.grounding = GroundingTable.default()
        self.last_time: Optional[float] = None
        # anchors seen in the previous frame -> percept position
        self.seen_last: Dict[str, Tuple[float, float, float]] = {}
        # anchor -> position of the last percept matched to it
        self.percept_positions: Dict[str, Tuple[float, float, float]] = {}

    @property
    def attach_reach(self) -> float:
        return 2.0 * self.ensemble.config.attach_length_scale

    def _checkpoint(self) -> Dict[str, object]:
        return copy.deepcopy(
            {
                "store": self.store,
                "ensemble": self.ensemble,
                "rng": self.rng,
                "last_time": self.last_time,
                "seen_last": self.seen_last,
                "percept_positions": self.percept_positions,
            }
        )

    def _restore(self, state: Dict[str, object]) -> None:
        for name, value in state.items():
            setattr(self, name, value)

    def step(self, frame: FrameInput) -> FrameReport:
        """Process one frame atomically: on any error the world is left as it was."""
        if self.last_time is not None and frame.t <= self.last_time:
            raise WorldLoopError(f"frame time {frame.t} does not advance past {self.last_time}")
        for percept in frame.percepts:
            check_category(percept.category, self.config.vocabulary)
        state = self._checkpoint()
        try:
            report = self._step(frame)
        except Exception:
            self._restore(state)
            raise
        if self.trace is not None:
            self.trace.write(report.to_record())
        return report

    def _step(self, frame: FrameInput) -> FrameReport:
        t = frame.t
        percepts = frame.percepts
        candidates = self.store.candidates(t, self.config.lost_candidate_horizon)
        decisions = associate(percepts, candidates, self.model, self.config.threshold, t)

        previous_status: Dict[str, AnchorStatus] = {}
        percept_anchors: List[str] = []
        acquired: List[str] = []
        for percept, decision in zip(percepts, decisions.decisions):
            if isinstance(decision, ReAcquire):
                previous_status[decision.anchor_id] = self.store.get(decision.anchor_id).status
                self.store.re_acquire(decision.anchor_id, percept, t)
                percept_anchors.append(decision.anchor_id)
            else:
                assert isinstance(decision, Acquire)
                anchor_id = self.store.acquire(percept, t)
                acquired.append(anchor_id)
                percept_anchors.append(anchor_id)

        seen_now = {aid: p.position for aid, p in zip(percept_anchors, percepts)}
        report = FrameReport(t=t, decisions=decisions, percept_anchors=percept_anchors, acquired=acquired)

        if self.config.tracker_enabled:
            self._update_tracker(t, seen_now, previous_status, report)

        for lost_id in self.store.age(t, self.config.max_track_age):
            report.events.append(OcclusionEvent("lost", lost_id))
            if lost_id in self.ensemble:
                self.ensemble.remove_object(lost_id)

        self.last_time = t
        self.seen_last = seen_now
        self.percept_positions.update(seen_now)
        report.statuses = self.store.statuses()
        report.positions = {a.id: a.position for a in self.store}
        report.symbols = {a.id: a.symbols(self.grounding) for a in self.store}
        if self.config.tracker_enabled:
            report.estimates = {oid: self.ensemble.estimate(oid) for oid in self.ensemble.object_ids}
            report.ess = self.ensemble.last_ess
            if self.config.trace_particles:
                report.particles = self.ensemble.snapshot()
        logger.debug("t=%.3f decisions=%s events=%s", t, report.percept_anchors, report.events)
        return report

    def _update_tracker(
        self,
        t: float,
        seen_now: Dict[str, Tuple[float, float, float]],
        previous_status: Dict[str, AnchorStatus],
        report: FrameReport,
    ) -> None:
        ensemble = self.ensemble
        if self.last_time is not None:
            ensemble.predict(t - self.last_time, self.rng)

        observations = {}
        for anchor_id in sorted(seen_now):
            if anchor_id in ensemble:
                observations[anchor_id] = seen_now[anchor_id]
            else:
                ensemble.init_object(anchor_id, seen_now[anchor_id], self.rng)
        unobserved = [oid for oid in ensemble.object_ids if oid not in seen_now]
        ensemble.weight_and_resample(observations, unobserved, self.rng, visible=list(seen_now.values()))

        # detach revealed objects before proposing new attachments, so no proposal can
        # hang a vanished object on a host that is itself still carried by it
        for anchor_id in sorted(previous_status):
            if previous_status[anchor_id] is AnchorStatus.TRACKED and anchor_id in ensemble:
                ensemble.detach_on_reveal(anchor_id)
                report.events.append(OcclusionEvent("detach", anchor_id))

        for anchor_id in sorted(self.seen_last):
            if anchor_id in seen_now or anchor_id not in ensemble:
                continue
            last_seen = np.asarray(self.seen_last[anchor_id])
            hosts = {
                host_id: pos
                for host_id, pos in seen_now.items()
                if np.linalg.norm(np.asarray(pos) - last_seen) <= self.attach_reach
            }
            ensemble.propose_attachments(anchor_id, hosts, last_seen, self.rng)
            report.events.append(OcclusionEvent("attach", anchor_id, tuple(sorted(hosts))))

        for anchor in self.store.candidates(t):
            if anchor.id in seen_now or anchor.status is AnchorStatus.LOST or anchor.id not in ensemble:
                continue
            mean = ensemble.estimate(anchor.id).mean
            updated = self.store.track(anchor.id, mean, t)
            report.tracked[anchor.id] = updated.position

    def run(self, frames: Sequence[FrameInput]) -> List[FrameReport]:
        return [self.step(frame) for frame in frames]


def consonance_check(world: WorldLoop) -> List[str]:
    """Disagreements between the anchor store and the particle ensemble; empty when consonant."""
    violations: List[str] = []
    for anchor in world.store:
        if anchor.status is AnchorStatus.TRACKED:
            if anchor.id not in world.ensemble:
                violations.append(f"{anchor.id}: tracked without a belief in the ensemble")
                continue
            mean = tuple(float(v) for v in world.ensemble.estimate(anchor.id).mean)
            if anchor.position != mean:
                violations.append(f"{anchor.id}: tracked position {anchor.position} != estimate {mean}")
        elif anchor.status is AnchorStatus.OBSERVED:
            expected = world.percept_positions.get(anchor.id)
            if anchor.position != expected:
                violations.append(f"{anchor.id}: position {anchor.position} != last percept {expected}")
    return violations
