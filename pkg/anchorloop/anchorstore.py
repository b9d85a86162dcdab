from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import AnchorStoreError
from .percepts import GroundingTable, Percept, ground_color_predicate, ground_size_predicate

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1


class AnchorStatus(str, Enum):
    OBSERVED = "observed"
    TRACKED = "tracked"
    LOST = "lost"


class FrameEvent(str, Enum):
    MATCH = "match"
    FEED = "feed"
    NEITHER = "neither"


# Total over status x event. NEITHER keeps the status; `AnchorStore.age` applies the lost policy.
TRANSITIONS: Dict[Tuple[AnchorStatus, FrameEvent], AnchorStatus] = {
    (AnchorStatus.OBSERVED, FrameEvent.MATCH): AnchorStatus.OBSERVED,
    (AnchorStatus.OBSERVED, FrameEvent.FEED): AnchorStatus.TRACKED,
    (AnchorStatus.OBSERVED, FrameEvent.NEITHER): AnchorStatus.OBSERVED,
    (AnchorStatus.TRACKED, FrameEvent.MATCH): AnchorStatus.OBSERVED,
    (AnchorStatus.TRACKED, FrameEvent.FEED): AnchorStatus.TRACKED,
    (AnchorStatus.TRACKED, FrameEvent.NEITHER): AnchorStatus.TRACKED,
    (AnchorStatus.LOST, FrameEvent.MATCH): AnchorStatus.OBSERVED,
    (AnchorStatus.LOST, FrameEvent.FEED): AnchorStatus.TRACKED,
    (AnchorStatus.LOST, FrameEvent.NEITHER): AnchorStatus.LOST,
}


@dataclass
class Anchor:
    id: str
    attributes: Percept
    last_observed: float
    status: AnchorStatus = AnchorStatus.OBSERVED
    history_len: int = 1
    last_fed: float = 0.0

    @property
    def category(self) -> str:
        return self.attributes.category

    @property
    def position(self) -> Tuple[float, float, float]:
        return self.attributes.position

    def symbols(self, table: Optional[GroundingTable] = None) -> Dict[str, str]:
        """Grounded predicate symbols for the anchor's current attributes."""
        table = table or GroundingTable.default()
        return {
            "class": self.attributes.category,
            "color": ground_color_predicate(self.attributes.color_hist, table),
            "size": ground_size_predicate(self.attributes.size_box),
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "id": self.id,
            "status": self.status.value,
            "last_observed": self.last_observed,
            "last_fed": self.last_fed,
            "history_len": self.history_len,
            "attributes": self.attributes.to_dict(),
        }


class _AttributesRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    category: str
    confidence: float
    color_hist: List[float]
    size_box: List[float]
    position: List[float]
    timestamp: float


class _AnchorRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    status: AnchorStatus
    last_observed: float
    last_fed: float
    history_len: int
    attributes: _AttributesRecord


class _StoreSnapshot(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: int
    counters: Dict[str, int]
    clock: Optional[float]
    anchors: List[_AnchorRecord]


@dataclass
class AnchorStore:
    """
    Permanent world model. Remembers every anchor ever acquired; identifiers are
    `<category>-<counter>` with per-category counters that are never reused.
    """

    anchors: Dict[str, Anchor] = field(default_factory=dict)
    counters: Dict[str, int] = field(default_factory=dict)
    clock: Optional[float] = None

    def __len__(self) -> int:
        return len(self.anchors)

    def __iter__(self) -> Iterator[Anchor]:
        return iter(self.anchors.values())

    def __contains__(self, anchor_id: object) -> bool:
        return anchor_id in self.anchors

    def get(self, anchor_id: str) -> Anchor:
        try:
            return self.anchors[anchor_id]
        except KeyError:
            raise AnchorStoreError(f"unknown anchor id '{anchor_id}'") from None

    def _advance_clock(self, t: float) -> None:
        if self.clock is None or t > self.clock:
            self.clock = t

    def acquire(self, percept: Percept, t: float) -> str:
        counter = self.counters.get(percept.category, 0) + 1
        self.counters[percept.category] = counter
        anchor_id = f"{percept.category}-{counter}"
        self.anchors[anchor_id] = Anchor(
            id=anchor_id,
            attributes=percept,
            last_observed=t,
            status=AnchorStatus.OBSERVED,
            history_len=1,
            last_fed=t,
        )
        self._advance_clock(t)
        logger.debug("acquired %s at t=%.3f", anchor_id, t)
        return anchor_id

    def re_acquire(self, anchor_id: str, percept: Percept, t: float) -> Anchor:
        anchor = self.get(anchor_id)
        if t < anchor.last_observed:
            raise AnchorStoreError(
                f"time regression for '{anchor_id}': {t} < last observed {anchor.last_observed}"
            )
        anchor.attributes = percept
        anchor.last_observed = t
        anchor.last_fed = t
        anchor.status = TRANSITIONS[(anchor.status, FrameEvent.MATCH)]
        anchor.history_len += 1
        self._advance_clock(t)
        return anchor

    def track(self, anchor_id: str, position: Sequence[float], t: float) -> Anchor:
        anchor = self.get(anchor_id)
        if t < anchor.last_fed:
            raise AnchorStoreError(
                f"time regression for '{anchor_id}': {t} < last update {anchor.last_fed}"
            )
        anchor.attributes = replace(anchor.attributes, position=tuple(float(v) for v in position))
        anchor.last_fed = t
        anchor.status = TRANSITIONS[(anchor.status, FrameEvent.FEED)]
        anchor.history_len += 1
        self._advance_clock(t)
        return anchor

    def age(self, t: float, max_track_age: float) -> List[str]:
        """
        Mark as lost every anchor that received nothing at time `t` and whose last
        percept is older than `max_track_age`. Returns the ids that changed.
        """
        changed: List[str] = []
        for anchor in self.anchors.values():
            if anchor.status is AnchorStatus.LOST or anchor.last_fed >= t:
                continue
            if t - anchor.last_observed > max_track_age:
                anchor.status = AnchorStatus.LOST
                changed.append(anchor.id)
        if changed:
            logger.info("anchors lost at t=%.3f: %s", t, ", ".join(changed))
        return changed

    def candidates(self, t: float, lost_horizon: Optional[float] = None) -> List[Anchor]:
        """Association candidates in id order; lost anchors drop out only past `lost_horizon`."""
        result = []
        for anchor_id in sorted(self.anchors):
            anchor = self.anchors[anchor_id]
            if (
                anchor.status is AnchorStatus.LOST
                and lost_horizon is not None
                and t - anchor.last_observed > lost_horizon
            ):
                continue
            result.append(anchor)
        return result

    def statuses(self) -> Dict[str, str]:
        return {anchor_id: self.anchors[anchor_id].status.value for anchor_id in sorted(self.anchors)}

    def to_dict(self) -> Dict[str, object]:
        return {
            "version": SNAPSHOT_VERSION,
            "counters": dict(sorted(self.counters.items())),
            "clock": self.clock,
            "anchors": [self.anchors[a].to_dict() for a in sorted(self.anchors)],
        }

    def snapshot(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2), encoding="utf-8")

    @classmethod
    def from_dict(cls, payload: Dict[str, object]) -> "AnchorStore":
        if payload.get("version") != SNAPSHOT_VERSION:
            raise AnchorStoreError(
                f"snapshot version {payload.get('version')!r} does not match {SNAPSHOT_VERSION}"
            )
        try:
            snap = _StoreSnapshot.model_validate(payload)
        except ValidationError as exc:
            raise AnchorStoreError(f"invalid snapshot: {exc}") from exc
        store = cls(counters=dict(snap.counters), clock=snap.clock)
        for record in snap.anchors:
            store.anchors[record.id] = Anchor(
                id=record.id,
                attributes=Percept.from_dict(record.attributes.model_dump()),
                last_observed=record.last_observed,
                status=record.status,
                history_len=record.history_len,
                last_fed=record.last_fed,
            )
        return store

    @classmethod
    def restore(cls, path: Path) -> "AnchorStore":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise AnchorStoreError(f"snapshot {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)
