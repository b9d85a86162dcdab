"""
Builtin scripted scenarios. Each is built frame by frame with `TimelineBuilder`, which
moves objects in bounded steps and carries attached objects rigidly with their host.
"""

from __future__ import annotations

import functools
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ScenarioError
from .percepts import peaked_histogram
from .simkit import FrameSpec, NoiseSpec, ObjectSpec, ObjectState, Scenario

Vec = Tuple[float, float, float]

DT = 0.5
STEP = 0.05

# hue bins 0-15, saturation bins 16-31, value bins 32-47
RED = peaked_histogram({0: 0.34, 29: 0.33, 44: 0.33})
ORANGE = peaked_histogram({2: 0.34, 26: 0.33, 42: 0.33})
YELLOW = peaked_histogram({3: 0.34, 28: 0.33, 46: 0.33})
GREEN = peaked_histogram({6: 0.34, 24: 0.33, 40: 0.33})
BLUE = peaked_histogram({11: 0.34, 20: 0.33, 36: 0.33})
PURPLE = peaked_histogram({13: 0.34, 22: 0.33, 34: 0.33})
GRAY = peaked_histogram({8: 0.34, 17: 0.33, 38: 0.33})


class TimelineBuilder:
    """Imperative scenario script: mutate the current state, emit frames."""

    def __init__(self, name: str, dt: float = DT) -> None:
        self.name = name
        self.dt = dt
        self.objects: List[ObjectSpec] = []
        self.state: Dict[str, Dict[str, object]] = {}
        self.offsets: Dict[str, np.ndarray] = {}
        self.frames: List[FrameSpec] = []

    def add(
        self,
        object_id: str,
        category: str,
        hist: Sequence[float],
        size: Vec,
        position: Vec,
        visible: bool = True,
    ) -> "TimelineBuilder":
        self.objects.append(ObjectSpec(id=object_id, category=category, color_hist=list(hist), size_box=size))
        self.state[object_id] = {"position": np.asarray(position, dtype=float), "visible": visible, "host": None}
        return self

    def position(self, object_id: str) -> np.ndarray:
        return self.state[object_id]["position"]  # type: ignore[return-value]

    def hide(self, object_id: str) -> "TimelineBuilder":
        self.state[object_id]["visible"] = False
        return self

    def show(self, object_id: str) -> "TimelineBuilder":
        self.state[object_id]["visible"] = True
        return self

    def attach(self, object_id: str, host: str) -> "TimelineBuilder":
        self.state[object_id]["host"] = host
        self.offsets[object_id] = self.position(object_id) - self.position(host)
        return self

    def detach(self, object_id: str) -> "TimelineBuilder":
        self.state[object_id]["host"] = None
        self.offsets.pop(object_id, None)
        return self

    def _carry(self) -> None:
        for _ in range(len(self.state)):
            for object_id, offset in self.offsets.items():
                host = self.state[object_id]["host"]
                self.state[object_id]["position"] = self.position(host) + offset  # type: ignore[arg-type]

    def frame(self) -> "TimelineBuilder":
        t = round(len(self.frames) * self.dt, 9)
        self._carry()
        self.frames.append(
            FrameSpec(
                t=t,
                objects={
                    oid: ObjectState(
                        position=tuple(float(v) for v in s["position"]),  # type: ignore[arg-type]
                        visible=bool(s["visible"]),
                        attached_to=s["host"],  # type: ignore[arg-type]
                    )
                    for oid, s in self.state.items()
                },
            )
        )
        return self

    def hold(self, n: int) -> "TimelineBuilder":
        for _ in range(n):
            self.frame()
        return self

    def move(self, object_id: str, target: Vec, step: float = STEP) -> "TimelineBuilder":
        """Straight-line move, at most `step` metres per frame, ending exactly on target."""
        start = self.position(object_id).copy()
        goal = np.asarray(target, dtype=float)
        n = max(1, math.ceil(np.linalg.norm(goal - start) / step - 1e-9))
        for i in range(1, n + 1):
            self.state[object_id]["position"] = start + (goal - start) * (i / n)
            self.frame()
        return self

    def animate(self, paths: Dict[str, Callable[[float], Vec]], n: int) -> "TimelineBuilder":
        """Move several objects along parametric paths s in (0, 1] over n frames."""
        for i in range(1, n + 1):
            for object_id, path in paths.items():
                self.state[object_id]["position"] = np.asarray(path(i / n), dtype=float)
            self.frame()
        return self

    def build(self, noise: Optional[NoiseSpec] = None, focus: Optional[str] = None) -> Scenario:
        return Scenario(
            name=self.name,
            objects=self.objects,
            frames=self.frames,
            noise=noise or NoiseSpec(),
            focus=focus,
        )


def simple_occlusion() -> Scenario:
    """A ball rolls behind a cup, stays hidden, then rolls back out."""
    b = TimelineBuilder("simple-occlusion")
    b.add("cup", "cup", RED, (0.09, 0.09, 0.12), (0.0, 0.0, 0.06))
    b.add("ball", "ball", GREEN, (0.05, 0.05, 0.05), (-0.30, 0.08, 0.025))
    b.add("apple", "apple", ORANGE, (0.08, 0.08, 0.08), (0.40, -0.25, 0.04))
    b.add("ball-blue", "ball", BLUE, (0.065, 0.065, 0.065), (-0.40, -0.35, 0.0325))
    b.hold(2)
    b.move("ball", (-0.10, 0.08, 0.025))
    b.hide("ball")
    b.move("ball", (0.0, 0.08, 0.025))
    b.hold(6)
    b.move("ball", (-0.05, 0.08, 0.025))
    b.show("ball")
    b.move("ball", (-0.10, 0.08, 0.025))
    b.hold(3)
    return b.build(focus="ball")


def moving_occluded() -> Scenario:
    """A cup covers a ball and carries it about 0.86 m before lifting to reveal it."""
    b = TimelineBuilder("moving-occluded")
    b.add("cup", "cup", RED, (0.09, 0.09, 0.12), (-0.40, 0.0, 0.06))
    b.add("ball", "ball", GREEN, (0.05, 0.05, 0.05), (-0.20, 0.0, 0.025))
    b.add("cup-blue", "cup", BLUE, (0.09, 0.09, 0.12), (0.40, -0.40, 0.06))
    b.add("apple", "apple", ORANGE, (0.08, 0.08, 0.08), (-0.55, 0.45, 0.04))
    b.hold(2)
    b.move("cup", (-0.25, 0.0, 0.06))
    b.hide("ball")
    b.move("cup", (-0.20, 0.0, 0.06))
    b.attach("ball", "cup")
    b.move("cup", (0.45, 0.56, 0.06))
    b.detach("ball").show("ball")
    b.move("cup", (0.45, 0.56, 0.18), step=0.06)
    b.hold(3)
    return b.build(focus="ball")


def unexpected_reveal() -> Scenario:
    """
    A glove already hiding a blue ball covers a red one, drops the blue ball on the way
    and finally reveals the red ball. The blue ball is a new object.
    """
    b = TimelineBuilder("unexpected-reveal")
    b.add("glove", "glove", PURPLE, (0.18, 0.10, 0.06), (-0.45, 0.10, 0.05))
    b.add("ball-red", "ball", RED, (0.05, 0.05, 0.05), (-0.15, 0.10, 0.025))
    b.add("ball-blue", "ball", BLUE, (0.065, 0.065, 0.065), (-0.45, 0.10, 0.0325), visible=False)
    b.add("mug", "mug", YELLOW, (0.10, 0.10, 0.11), (0.40, -0.35, 0.055))
    b.attach("ball-blue", "glove")
    b.hold(2)
    b.move("glove", (-0.20, 0.10, 0.05))
    b.hide("ball-red")
    b.move("glove", (-0.15, 0.10, 0.05))
    b.attach("ball-red", "glove")
    b.move("glove", (0.15, 0.10, 0.05))
    b.detach("ball-blue").show("ball-blue")
    b.move("glove", (0.45, 0.10, 0.05))
    b.detach("ball-red").show("ball-red")
    b.move("glove", (0.45, 0.10, 0.17), step=0.06)
    b.hold(3)
    return b.build(focus="ball-red")


SHELL_SLOTS = (-0.35, 0.0, 0.35)
SHELL_SWAPS: Tuple[Tuple[int, int], ...] = ((0, 1), (1, 2), (0, 1), (1, 2))
SWAP_FRAMES = 7
SWAP_ARC = 0.15


def shell_game() -> Scenario:
    """
    Three identical containers; the middle one covers a block, then containers in
    adjacent slots swap along opposite arcs. The carrier finally lifts to reveal it.
    """
    b = TimelineBuilder("shell-game")
    z = 0.05
    for i, x in enumerate(SHELL_SLOTS, start=1):
        b.add(f"container-{i}", "container", GRAY, (0.12, 0.12, 0.10), (x, 0.0, z))
    b.add("block", "block", YELLOW, (0.04, 0.04, 0.04), (0.0, 0.35, 0.02))
    b.hold(2)
    b.move("container-2", (0.0, 0.30, z))
    b.hide("block")
    b.move("container-2", (0.0, 0.35, z))
    b.attach("block", "container-2")
    b.move("container-2", (0.0, 0.0, z))

    occupant = {0: "container-1", 1: "container-2", 2: "container-3"}
    for left, right in SHELL_SWAPS:
        if abs(left - right) != 1:
            raise ScenarioError("shell game swaps must be between adjacent slots")
        xa, xb = SHELL_SLOTS[left], SHELL_SLOTS[right]
        b.animate(
            {
                occupant[left]: _arc(xa, xb, SWAP_ARC, z),
                occupant[right]: _arc(xb, xa, -SWAP_ARC, z),
            },
            SWAP_FRAMES,
        )
        occupant[left], occupant[right] = occupant[right], occupant[left]

    b.detach("block").show("block")
    carrier = b.position("container-2")
    b.move("container-2", (float(carrier[0]), float(carrier[1]), z + 0.12), step=0.06)
    b.hold(3)
    return b.build(focus="block")


def _arc(x_from: float, x_to: float, amplitude: float, z: float) -> Callable[[float], Vec]:
    def path(s: float) -> Vec:
        return (x_from + (x_to - x_from) * s, amplitude * math.sin(math.pi * s), z)

    return path


BUILDERS: Dict[str, Callable[[], Scenario]] = {
    "simple-occlusion": simple_occlusion,
    "moving-occluded": moving_occluded,
    "unexpected-reveal": unexpected_reveal,
    "shell-game": shell_game,
}


@functools.lru_cache(maxsize=1)
def _cached() -> Dict[str, Scenario]:
    return {name: build() for name, build in BUILDERS.items()}


def builtin_scenarios() -> Dict[str, Scenario]:
    """Fresh copies of the builtin scenarios keyed by name."""
    return {name: scenario.model_copy(deep=True) for name, scenario in _cached().items()}
