from __future__ import annotations

import json

import pytest

from anchorloop.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


def run_cli(capsys, *argv: str):
    code = main(list(argv))
    captured = capsys.readouterr()
    payload = json.loads(captured.out) if code == EXIT_OK else None
    return code, payload, captured.err


@pytest.fixture
def dataset(tmp_path, capsys):
    path = tmp_path / "data" / "pairs.csv"
    code, payload, _ = run_cli(
        capsys, "gen-dataset", "--scenarios", "simple-occlusion", "--n", "300", "--seed", "1", "--out", str(path)
    )
    assert code == EXIT_OK
    assert payload["samples"] == 300
    assert payload["positives"] + payload["negatives"] == 300
    return path


@pytest.fixture
def model_file(tmp_path, capsys, dataset):
    path = tmp_path / "models" / "knn.json"
    code, payload, _ = run_cli(capsys, "train", "--dataset", str(dataset), "--algo", "knn", "--model-out", str(path))
    assert code == EXIT_OK
    assert (payload["n_train"], payload["n_test"]) == (210, 90)
    assert path.exists()
    return path


# --- ddc ---


def test_ddc_query_on_bundled_program(capsys):
    code, payload, _ = run_cli(capsys, "ddc", "--program", "example-1", "--query", "true", "--samples", "50")
    assert code == EXIT_OK
    assert payload["probability"] == 1.0
    assert payload["n_samples"] == 50


def test_ddc_mean_of_a_term(capsys):
    code, payload, _ = run_cli(capsys, "ddc", "--program", "example-1", "--mean", "n", "--samples", "4000")
    assert code == EXIT_OK
    assert payload["defined"] == 4000
    assert payload["mean"] == pytest.approx(6.0, abs=0.25)


def test_ddc_mean_over_time(capsys):
    code, payload, _ = run_cli(
        capsys, "ddc", "--program", "example-2", "--mean", "pos(1)@2", "--horizon", "2", "--samples", "500"
    )
    assert code == EXIT_OK
    assert payload["defined"] > 450
    assert payload["mean"] > 6.0


def test_ddc_object_belief_stays_near_the_last_observation(capsys):
    code, payload, _ = run_cli(
        capsys, "ddc", "--program", "object-belief", "--mean", "pos(o)@3", "--horizon", "3", "--samples", "2000"
    )
    assert code == EXIT_OK
    assert payload["defined"] == 2000
    assert payload["mean"] == pytest.approx([0.0, 0.0, 0.0], abs=0.01)


def test_ddc_reads_program_files(tmp_path, capsys):
    path = tmp_path / "coin.json"
    path.write_text(json.dumps({"static": [{"head": "coin", "dist": {"tag": "finite", "params": {"weights": [[1.0, "h"]]}}}]}))
    code, payload, _ = run_cli(capsys, "ddc", "--program", str(path), "--query", "coin = h", "--samples", "20")
    assert code == EXIT_OK
    assert payload["probability"] == 1.0


@pytest.mark.parametrize(
    "argv",
    [
        ["ddc", "--program", "example-1"],
        ["ddc", "--program", "no/such/program.json", "--query", "true"],
        ["ddc", "--program", "example-1", "--query", "left(1,2"],
        ["ddc", "--program", "example-1", "--mean", "pos("],
    ],
)
def test_ddc_usage_errors(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == EXIT_USAGE
    assert "error:" in err


# --- Datasets and models ---


def test_compare_reports_all_variants(capsys, dataset):
    code, payload, _ = run_cli(capsys, "compare", "--dataset", str(dataset), "--seeds", "2")
    assert code == EXIT_OK
    assert len(payload) == 6
    assert {row["n_features"] for row in payload} == {4, 5}


def test_train_rejects_malformed_datasets(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("d_class,d_color,d_pos,d_size,d_time,label\n0.5,0.5,0.5,0.5,0.5,7\n")
    code, _, err = run_cli(capsys, "train", "--dataset", str(path))
    assert code == EXIT_USAGE
    assert "line 2" in err


def test_train_on_one_label_is_a_runtime_error(tmp_path, capsys):
    path = tmp_path / "ones.csv"
    path.write_text("".join("1.0,1.0,1.0,1.0,1.0,1\n" for _ in range(10)))
    code, _, err = run_cli(capsys, "train", "--dataset", str(path))
    assert code == EXIT_RUNTIME
    assert "degenerate" in err


def test_gen_dataset_rejects_tiny_targets(tmp_path, capsys):
    code, _, err = run_cli(capsys, "gen-dataset", "--n", "3", "--out", str(tmp_path / "x.csv"))
    assert code == EXIT_RUNTIME
    assert "at least" in err


# --- run ---


def test_run_is_deterministic(capsys, model_file):
    argv = ["run", "--scenario", "simple-occlusion", "--seed", "42", "--particles", "200", "--model", str(model_file)]
    code, first, _ = run_cli(capsys, *argv)
    assert code == EXIT_OK
    _, second, _ = run_cli(capsys, *argv)
    assert first == second
    assert first["scenario"] == "simple-occlusion"
    assert first["seed"] == 42
    assert first["tracker"] is True
    assert first["matcher_accuracy"] is None


def test_run_repeat_writes_traces_and_metrics(tmp_path, capsys, model_file):
    trace = tmp_path / "out" / "trace.jsonl"
    metrics = tmp_path / "out" / "metrics.json"
    code, payload, _ = run_cli(
        capsys,
        "run",
        "--scenario", "simple-occlusion",
        "--particles", "100",
        "--tracker", "off",
        "--model", str(model_file),
        "--repeat", "2",
        "--trace", str(trace),
        "--metrics", str(metrics),
    )
    assert code == EXIT_OK
    assert payload["summary"]["runs"] == 2
    assert [r["seed"] for r in payload["runs"]] == [0, 1]
    assert json.loads(metrics.read_text()) == payload
    for seed in (0, 1):
        lines = (tmp_path / "out" / f"trace-seed{seed}.jsonl").read_text().splitlines()
        assert len(lines) == payload["runs"][seed]["frames"]


def test_run_trace_particles_adds_the_cloud_and_symbols(tmp_path, capsys, model_file):
    trace = tmp_path / "trace.jsonl"
    code, _, _ = run_cli(
        capsys,
        "run",
        "--scenario", "simple-occlusion",
        "--particles", "20",
        "--model", str(model_file),
        "--trace", str(trace),
        "--trace-particles",
    )
    assert code == EXIT_OK
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    assert all(len(r["particles"]["weights"]) == 20 for r in records)
    assert all(set(r["symbols"]) == set(r["statuses"]) for r in records)


def test_config_file_is_overridden_by_flags(tmp_path, capsys, model_file):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"scenario": "simple-occlusion", "seed": 3, "particles": 100, "tracker": "off"}))
    code, payload, _ = run_cli(capsys, "run", "--config", str(config), "--seed", "5", "--model", str(model_file))
    assert code == EXIT_OK
    assert payload["seed"] == 5
    assert payload["tracker"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--scenario", "missing/scenario.json"],
        ["run", "--particles", "0"],
        ["run", "--threshold", "1.5"],
        ["run", "--model", "missing/model.json"],
    ],
)
def test_run_usage_errors(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == EXIT_USAGE
    assert "error:" in err


def test_unknown_config_keys_are_usage_errors(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"scenario": "simple-occlusion", "colour": "red"}))
    code, _, _ = run_cli(capsys, "run", "--config", str(config))
    assert code == EXIT_USAGE


def test_bad_log_level_is_a_usage_error(capsys):
    code, _, _ = run_cli(capsys, "--log-level", "LOUD", "ddc", "--program", "example-1", "--query", "true")
    assert code == EXIT_USAGE
