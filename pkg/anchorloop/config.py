from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator
from rich.console import Console
from rich.logging import RichHandler

from .errors import AnchorloopError


DEFAULT_VOCABULARY: tuple[str, ...] = (
    "apple",
    "ball",
    "block",
    "container",
    "cup",
    "glove",
    "mug",
    "skin",
)

LOG_FORMAT = "%(name)s: %(message)s"


@dataclass
class AnchorloopConfig:
    """
    Central configuration for one world instance.
    Defaults mirror the documented design decisions; everything is overridable per run.
    """

    threshold: float = 0.5
    max_track_age: float = 30.0
    lost_candidate_horizon: Optional[float] = None
    tracker_enabled: bool = True
    particles: int = 1000
    trace_particles: bool = False
    vocabulary: tuple[str, ...] = field(default_factory=lambda: DEFAULT_VOCABULARY)

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise AnchorloopError(f"threshold must lie in [0,1], got {self.threshold}")
        if self.max_track_age <= 0:
            raise AnchorloopError("max_track_age must be positive")
        if self.particles < 1:
            raise AnchorloopError("particles must be >= 1")


class RunConfig(BaseModel):
    """Validated command-line configuration for `anchorloop run`."""

    model_config = ConfigDict(extra="forbid")

    scenario: str = "simple-occlusion"
    seed: int = 0
    particles: int = Field(default=1000, ge=1, le=200_000)
    tracker: Literal["on", "off"] = "on"
    model: Optional[Path] = None
    threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    trace: Optional[Path] = None
    metrics: Optional[Path] = None
    repeat: int = Field(default=1, ge=1, le=10_000)
    trace_particles: bool = False

    @field_validator("scenario")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("scenario must be a builtin name or a path")
        return value

    @classmethod
    def from_sources(cls, config_path: Optional[Path], overrides: dict) -> "RunConfig":
        """Config file first, then every flag that was actually given."""
        payload: dict = {}
        if config_path is not None:
            payload.update(json.loads(Path(config_path).read_text(encoding="utf-8")))
        payload.update({k: v for k, v in overrides.items() if v is not None})
        return cls.model_validate(payload)

    def world_config(self) -> AnchorloopConfig:
        return AnchorloopConfig(
            threshold=self.threshold,
            tracker_enabled=self.tracker == "on",
            particles=self.particles,
            trace_particles=self.trace_particles,
        )


def configure_logging(level: str | int = logging.WARNING, console: Console | None = None) -> None:
    """Route package logs through rich on standard error."""
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_time=False,
        show_path=False,
        markup=False,
    )
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("anchorloop")
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(level if isinstance(level, int) else level.upper())
