"""
End-to-end runs of the builtin scenarios with the default matcher.

Quick runs use 500 particles and 10 seeds with loose rates. The tests marked slow run
the full protocol: 1000 particles and 40 seeds per scenario.
"""

from __future__ import annotations

import functools
from typing import List

import numpy as np
import pytest

from anchorloop.config import AnchorloopConfig
from anchorloop.matcher import compare_algorithms
from anchorloop.scenarios import SHELL_SWAPS, builtin_scenarios
from anchorloop.simkit import (
    MetricsReport,
    evaluate,
    frame_rng,
    generate_frame,
    generate_matcher_dataset,
    run_scenario,
)
from anchorloop.simkit import default_model as trained_default
from anchorloop.worldloop import FrameInput, WorldLoop, consonance_check

PARTICLES = 500
N_SEEDS = 10


@functools.lru_cache(maxsize=None)
def metrics_for(name: str, tracker: bool, particles: int = PARTICLES, n_seeds: int = N_SEEDS) -> List[MetricsReport]:
    scenario = builtin_scenarios()[name]
    model, report = trained_default()
    config = AnchorloopConfig(particles=particles, tracker_enabled=tracker)
    results = []
    for seed in range(n_seeds):
        _, reports, truths = run_scenario(scenario, model, config, seed=seed)
        results.append(evaluate(reports, truths, scenario, seed=seed, tracker=tracker, matcher=report))
    return results


def rate(values) -> float:
    return float(np.mean([bool(v) for v in values]))


# --- Scenario scripts ---


def test_builtin_scenarios_are_valid_and_focused():
    scenarios = builtin_scenarios()
    assert sorted(scenarios) == ["moving-occluded", "shell-game", "simple-occlusion", "unexpected-reveal"]
    for name, scenario in scenarios.items():
        assert scenario.name == name
        assert scenario.focus is not None
        hidden = [f for f in scenario.frames if not f.objects[scenario.focus].visible]
        assert hidden, f"{name} never hides its focus object"
        assert scenario.frames[-1].objects[scenario.focus].visible


def test_builtin_scenarios_are_fresh_copies():
    first = builtin_scenarios()["shell-game"]
    first.frames.clear()
    assert builtin_scenarios()["shell-game"].frames


def test_objects_move_in_small_steps():
    for scenario in builtin_scenarios().values():
        for before, after in zip(scenario.frames, scenario.frames[1:]):
            for oid, state in after.objects.items():
                step = np.linalg.norm(np.subtract(state.position, before.objects[oid].position))
                assert step <= 0.1 + 1e-9


def test_carry_covers_a_long_distance():
    scenario = builtin_scenarios()["moving-occluded"]
    carried = [f.objects["ball"].position for f in scenario.frames if f.objects["ball"].attached_to == "cup"]
    assert np.linalg.norm(np.subtract(carried[-1], carried[0])) > 0.8


def test_shell_game_uses_identical_containers():
    scenario = builtin_scenarios()["shell-game"]
    containers = [o for o in scenario.objects if o.category == "container"]
    assert len(containers) == 3
    assert len({tuple(o.color_hist) for o in containers}) == 1
    assert len({o.size_box for o in containers}) == 1
    assert len(SHELL_SWAPS) >= 4
    final_host = [f.objects["block"].attached_to for f in scenario.frames if not f.objects["block"].visible][-1]
    assert final_host == "container-2"


def test_scenario_frames_are_reproducible():
    scenario = builtin_scenarios()["simple-occlusion"]
    first = generate_frame(scenario, 5, frame_rng(42, 5))
    second = generate_frame(scenario, 5, frame_rng(42, 5))
    assert first == second


# --- Default matcher ---


def test_default_matcher_is_accurate_on_replayed_data():
    model, report = trained_default()
    assert model.n_features == 5
    assert report.n_train + report.n_test == 5400
    assert report.accuracy >= 0.9


@functools.lru_cache(maxsize=None)
def replayed_comparison():
    samples = generate_matcher_dataset(list(builtin_scenarios().values()), np.random.default_rng(0))
    return {(row.algorithm, row.n_features): row for row in compare_algorithms(samples, seeds=range(5))}


@pytest.mark.parametrize("algorithm", ["bayes", "knn", "logistic"])
def test_every_algorithm_is_accurate_with_the_full_feature_set(algorithm):
    row = replayed_comparison()[(algorithm, 5)]
    assert len(row.accuracies) == 5
    assert row.accuracy >= 0.9


def test_time_feature_helps_most_algorithms():
    rows = replayed_comparison()
    improved = [a for a in ("bayes", "knn", "logistic") if rows[(a, 5)].accuracy >= rows[(a, 4)].accuracy]
    assert len(improved) >= 2, improved


# --- End-to-end runs ---


@pytest.mark.parametrize("name", ["simple-occlusion", "moving-occluded", "unexpected-reveal"])
def test_hidden_object_keeps_its_identity(name):
    results = metrics_for(name, True)
    assert rate(m.focus_reacquired and m.id_switches == 0 for m in results) >= 0.8


def test_without_tracking_a_carried_object_comes_back_as_new():
    results = metrics_for("moving-occluded", False)
    assert rate(m.id_switches >= 1 for m in results) >= 0.8
    assert all(m.host_accuracy is None for m in results)


def test_tracking_never_adds_identities():
    on = sum(m.acquire_count for m in metrics_for("moving-occluded", True))
    off = sum(m.acquire_count for m in metrics_for("moving-occluded", False))
    assert off >= on


def test_shell_game_finds_the_right_container():
    results = metrics_for("shell-game", True)
    assert rate(m.final_host_correct for m in results) >= 0.7
    assert rate(m.focus_reacquired for m in results) >= 0.7


def test_store_and_tracker_stay_consonant():
    model, _ = trained_default()
    config = AnchorloopConfig(particles=200)
    for scenario in builtin_scenarios().values():
        for seed in range(2):
            world = WorldLoop(model, config, seed=seed)
            for index, frame in enumerate(scenario.frames):
                percepts, _ = generate_frame(scenario, index, frame_rng(seed, index))
                world.step(FrameInput(frame.t, tuple(percepts)))
                assert consonance_check(world) == [], f"{scenario.name} seed={seed} t={frame.t}"


# --- Full protocol ---

FULL_PARTICLES = 1000
FULL_SEEDS = 40


@pytest.mark.slow
@pytest.mark.parametrize("name", ["simple-occlusion", "moving-occluded", "unexpected-reveal"])
def test_full_protocol_hidden_object_keeps_its_identity(name):
    results = metrics_for(name, True, FULL_PARTICLES, FULL_SEEDS)
    assert len(results) == FULL_SEEDS
    assert rate(m.focus_reacquired and m.id_switches == 0 for m in results) >= 0.95


@pytest.mark.slow
def test_full_protocol_without_tracking_switches_identity():
    results = metrics_for("moving-occluded", False, FULL_PARTICLES, FULL_SEEDS)
    assert rate(m.id_switches >= 1 for m in results) >= 0.95


@pytest.mark.slow
def test_full_protocol_shell_game():
    results = metrics_for("shell-game", True, FULL_PARTICLES, FULL_SEEDS)
    assert rate(m.final_host_correct for m in results) >= 0.9
    assert rate(m.focus_reacquired for m in results) >= 0.9
