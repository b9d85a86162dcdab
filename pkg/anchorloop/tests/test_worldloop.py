from __future__ import annotations

import json

import numpy as np
import pytest

from anchorloop.config import AnchorloopConfig
from anchorloop.errors import PerceptError, TrackerError, WorldLoopError
from anchorloop.rpf import ParticleEnsemble, TrackerConfig
from anchorloop.trace import TraceWriter
from anchorloop.worldloop import FrameInput, OcclusionEvent, WorldLoop, consonance_check

from .conftest import ClassPositionModel, percept

ORIGIN = (0.0, 0.0, 0.0)
BESIDE = (0.05, 0.0, 0.0)


def frame(t: float, *items) -> FrameInput:
    return FrameInput(t, tuple(percept(category, position=position, t=t) for category, position in items))


def make_world(**config) -> WorldLoop:
    tracker = TrackerConfig(n_particles=500, motion_cov=0.1**2 * np.eye(3))
    return WorldLoop(ClassPositionModel(5), AnchorloopConfig(**config), seed=3, tracker_config=tracker)


def test_second_sighting_re_acquires():
    world = make_world()
    first = world.step(frame(0.0, ("cup", ORIGIN)))
    second = world.step(frame(0.5, ("cup", (0.01, 0.0, 0.0))))
    assert first.acquired == ["cup-1"]
    assert second.acquired == []
    assert second.percept_anchors == ["cup-1"]
    assert second.statuses == {"cup-1": "observed"}
    assert world.store.get("cup-1").history_len == 2


def test_vanished_object_attaches_to_nearby_host_and_follows_it():
    world = make_world()
    world.step(frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)))
    hidden = world.step(frame(0.5, ("cup", ORIGIN)))

    assert OcclusionEvent("attach", "ball-1", ("cup-1",)) in hidden.events
    assert hidden.statuses == {"ball-1": "tracked", "cup-1": "observed"}
    assert hidden.estimates["ball-1"].host == "cup-1"
    assert consonance_check(world) == []

    moved = world.step(frame(1.0, ("cup", (0.1, 0.0, 0.0))))
    assert moved.percept_anchors == ["cup-1"]
    assert moved.tracked["ball-1"][0] > 0.09
    assert consonance_check(world) == []


def test_reveal_detaches_and_re_acquires():
    world = make_world()
    world.step(frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)))
    world.step(frame(0.5, ("cup", ORIGIN)))
    revealed = world.step(frame(1.0, ("cup", (0.3, 0.0, 0.0)), ("ball", BESIDE)))
    assert revealed.percept_anchors == ["cup-1", "ball-1"]
    assert OcclusionEvent("detach", "ball-1") in revealed.events
    assert revealed.estimates["ball-1"].attachment == {"free": pytest.approx(1.0)}
    assert revealed.statuses == {"ball-1": "observed", "cup-1": "observed"}


def test_tracker_off_keeps_unseen_anchors_observed():
    world = make_world(tracker_enabled=False)
    world.step(frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)))
    report = world.step(frame(0.5, ("cup", ORIGIN)))
    assert report.tracked == {}
    assert report.estimates == {} and report.ess is None
    assert report.statuses["ball-1"] == "observed"
    assert world.ensemble.object_ids == []
    assert report.positions["ball-1"] == BESIDE


def test_anchor_is_lost_after_max_track_age_and_can_return():
    world = make_world(max_track_age=1.0, tracker_enabled=False)
    world.step(frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)))
    world.step(frame(0.5, ("cup", ORIGIN)))
    kept = world.step(frame(1.0, ("cup", ORIGIN)))
    lost = world.step(frame(1.5, ("cup", ORIGIN)))

    assert kept.statuses["ball-1"] == "observed"
    assert OcclusionEvent("lost", "ball-1") in lost.events
    assert lost.statuses["ball-1"] == "lost"

    back = world.step(frame(2.0, ("cup", ORIGIN), ("ball", BESIDE)))
    assert back.percept_anchors == ["cup-1", "ball-1"]
    assert back.statuses["ball-1"] == "observed"


def test_long_occlusion_stays_tracked_while_the_tracker_feeds_it():
    world = make_world(max_track_age=1.0)
    world.step(frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)))
    reports = [world.step(frame(0.5 * k, ("cup", ORIGIN))) for k in range(1, 9)]

    assert all(r.statuses["ball-1"] == "tracked" for r in reports)
    assert not any(e.kind == "lost" for r in reports for e in r.events)
    assert "ball-1" in reports[-1].tracked
    assert world.store.get("ball-1").last_fed == 4.0
    assert consonance_check(world) == []

    back = world.step(frame(4.5, ("cup", ORIGIN), ("ball", BESIDE)))
    assert back.percept_anchors == ["cup-1", "ball-1"]
    assert back.statuses["ball-1"] == "observed"


def test_out_of_vocabulary_percept_is_rejected_without_side_effects():
    world = make_world()
    world.step(frame(0.0, ("cup", ORIGIN)))
    before = world.store.to_dict()
    with pytest.raises(PerceptError, match="unknown category label 'spoon'"):
        world.step(frame(0.5, ("cup", ORIGIN), ("spoon", BESIDE)))
    assert world.store.to_dict() == before
    assert world.last_time == 0.0
    assert world.ensemble.object_ids == ["cup-1"]

    narrow = make_world(vocabulary=("cup",))
    with pytest.raises(PerceptError):
        narrow.step(frame(0.0, ("ball", ORIGIN)))
    assert len(narrow.store) == 0 and narrow.last_time is None


def test_time_must_advance():
    world = make_world()
    world.step(frame(1.0, ("cup", ORIGIN)))
    with pytest.raises(WorldLoopError, match="does not advance"):
        world.step(frame(1.0, ("cup", ORIGIN)))
    with pytest.raises(WorldLoopError):
        world.step(frame(0.5, ("cup", ORIGIN)))
    assert world.last_time == 1.0


def test_failed_step_leaves_the_world_untouched(monkeypatch):
    world = make_world()
    world.step(frame(0.0, ("cup", ORIGIN)))
    before = world.store.to_dict()

    def fail(self, *args, **kwargs):
        raise TrackerError("weighting failed")

    monkeypatch.setattr(ParticleEnsemble, "weight_and_resample", fail)
    with pytest.raises(TrackerError):
        world.step(frame(0.5, ("cup", ORIGIN), ("ball", BESIDE)))
    assert world.store.to_dict() == before
    assert world.last_time == 0.0
    assert world.ensemble.object_ids == ["cup-1"]

    monkeypatch.undo()
    report = world.step(frame(0.5, ("cup", ORIGIN), ("ball", BESIDE)))
    assert report.acquired == ["ball-1"]


def test_same_seed_same_run():
    frames = [
        frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)),
        frame(0.5, ("cup", ORIGIN)),
        frame(1.0, ("cup", (0.1, 0.0, 0.0))),
    ]
    first = [r.to_record() for r in make_world().run(frames)]
    second = [r.to_record() for r in make_world().run(frames)]
    assert first == second


def test_trace_has_one_record_per_frame(tmp_path):
    path = tmp_path / "traces" / "run.jsonl"
    tracker = TrackerConfig(n_particles=200)
    with TraceWriter(path) as trace:
        world = WorldLoop(ClassPositionModel(5), seed=0, tracker_config=tracker, trace=trace)
        world.run([frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)), frame(0.5, ("cup", ORIGIN))])

    records = [json.loads(line) for line in path.read_text().splitlines()]
    assert [r["t"] for r in records] == [0.0, 0.5]
    assert records[1]["statuses"] == {"ball-1": "tracked", "cup-1": "observed"}
    assert records[1]["events"][0]["kind"] == "attach"
    assert set(records[1]["estimates"]) == {"ball-1", "cup-1"}
    assert records[0]["decisions"] == [{"kind": "acquire"}, {"kind": "acquire"}]
    assert records[1]["symbols"]["cup-1"]["class"] == "cup"
    assert set(records[1]["symbols"]["ball-1"]) == {"class", "color", "size"}
    assert "particles" not in records[1]


def test_trace_can_carry_the_particle_cloud(tmp_path):
    path = tmp_path / "run.jsonl"
    tracker = TrackerConfig(n_particles=50)
    with TraceWriter(path) as trace:
        world = WorldLoop(
            ClassPositionModel(5), AnchorloopConfig(trace_particles=True), seed=0, tracker_config=tracker, trace=trace
        )
        world.run([frame(0.0, ("cup", ORIGIN), ("ball", BESIDE)), frame(0.5, ("cup", ORIGIN))])

    record = json.loads(path.read_text().splitlines()[-1])
    particles = record["particles"]
    assert sorted(particles["object_ids"]) == ["ball-1", "cup-1"]
    assert len(particles["weights"]) == 50
    assert len(particles["particles"]["ball-1"]["positions"]) == 50
    assert set(particles["particles"]["ball-1"]["hosts"]) <= {"free", "cup-1"}


def test_particle_trace_is_skipped_when_the_tracker_is_off():
    world = make_world(tracker_enabled=False, trace_particles=True)
    report = world.step(frame(0.0, ("cup", ORIGIN)))
    assert report.particles is None
    assert report.symbols["cup-1"]["class"] == "cup"
