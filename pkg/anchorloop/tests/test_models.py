from __future__ import annotations

import json

import numpy as np
import pytest

from anchorloop.errors import MatcherError
from anchorloop.models import (
    ALGORITHMS,
    MODEL_FILE_VERSION,
    GaussianBayesModel,
    KNNModel,
    LogisticModel,
    load_model,
    make_model,
    save_model,
)


def separable(n: int = 40, n_features: int = 5, seed: int = 0):
    rng = np.random.default_rng(seed)
    matches = rng.uniform(0.85, 1.0, size=(n, n_features))
    others = rng.uniform(0.0, 0.15, size=(n, n_features))
    features = np.vstack([matches, others])
    labels = np.array([1] * n + [0] * n)
    return features, labels


def test_knn_score_is_fraction_of_three_nearest():
    points = np.array(
        [
            [1.0, 1.0, 1.0, 1.0, 1.0],
            [0.9, 1.0, 1.0, 1.0, 1.0],
            [0.8, 1.0, 1.0, 1.0, 1.0],
            [0.0, 0.0, 0.0, 0.0, 0.0],
        ]
    )
    labels = np.array([1, 1, 0, 0])
    model = KNNModel(5).fit(points, labels)
    assert model.score(np.ones(5))[0] == pytest.approx(2.0 / 3.0)
    assert model.score(np.zeros(5))[0] == pytest.approx(1.0 / 3.0)


def test_knn_matches_exhaustive_neighbour_oracle():
    rng = np.random.default_rng(3)
    points = rng.uniform(size=(30, 4))
    labels = rng.integers(0, 2, size=30)
    model = KNNModel(4).fit(points, labels)
    queries = rng.uniform(size=(10, 4))
    for query, score in zip(queries, model.score(queries)):
        dist = [float(np.sum((p - query) ** 2)) for p in points]
        nearest = sorted(range(30), key=lambda i: (dist[i], i))[:3]
        assert score == pytest.approx(labels[nearest].mean())


def test_logistic_with_zero_weights_scores_half():
    model = LogisticModel(5)
    assert np.allclose(model.score(np.random.default_rng(0).uniform(size=(6, 5))), 0.5)


def test_logistic_standardises_features_and_saves_the_scaling(tmp_path):
    features, labels = separable()
    features[:, 2] = 0.5
    model = LogisticModel(5).fit(features, labels)
    assert model.scale[2] == 1.0
    assert np.allclose(model.mean, features.mean(axis=0))
    assert np.array_equal(model.predict_labels(features), labels)

    path = tmp_path / "logistic.json"
    save_model(model, path)
    restored = load_model(path)
    assert np.array_equal(restored.mean, model.mean)
    assert np.array_equal(restored.scale, model.scale)


def test_logistic_learns_a_narrow_feature_range():
    rng = np.random.default_rng(0)
    features = rng.uniform(0.49, 0.51, size=(400, 4))
    labels = (features[:, 0] > 0.5).astype(int)
    model = LogisticModel(4).fit(features, labels)
    assert np.mean(model.predict_labels(features) == labels) >= 0.95


@pytest.mark.parametrize("algorithm", sorted(ALGORITHMS))
def test_every_model_separates_separable_data(algorithm):
    features, labels = separable()
    model = make_model(algorithm, 5).fit(features, labels)
    assert np.array_equal(model.predict_labels(features), labels)
    assert model.score(np.ones(5))[0] >= 0.5
    scores = model.score(features)
    assert np.all((scores >= 0.0) & (scores <= 1.0))


@pytest.mark.parametrize("algorithm", sorted(ALGORITHMS))
def test_models_reject_wrong_feature_count(algorithm):
    features, labels = separable(n_features=4)
    model = make_model(algorithm, 4).fit(features, labels)
    with pytest.raises(MatcherError, match="expects 4 features"):
        model.score(np.ones(5))


def test_bayes_needs_both_labels():
    features, _ = separable()
    with pytest.raises(MatcherError, match="degenerate training set"):
        GaussianBayesModel(5).fit(features, np.ones(features.shape[0], dtype=int))


def test_make_model_rejects_unknown_algorithm_and_feature_count():
    with pytest.raises(MatcherError, match="unknown algorithm"):
        make_model("svm")
    with pytest.raises(MatcherError, match="4 or 5"):
        make_model("knn", 3)


@pytest.mark.parametrize("algorithm", sorted(ALGORITHMS))
def test_saved_model_scores_identically(tmp_path, algorithm):
    features, labels = separable(seed=1)
    model = make_model(algorithm, 5).fit(features, labels)
    path = tmp_path / "models" / f"{algorithm}.json"
    save_model(model, path)

    payload = json.loads(path.read_text())
    assert payload["version"] == MODEL_FILE_VERSION
    assert payload["algorithm"] == algorithm

    restored = load_model(path)
    queries = np.random.default_rng(9).uniform(size=(20, 5))
    assert np.array_equal(restored.score(queries), model.score(queries))


def test_load_model_rejects_other_versions(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"version": 99, "algorithm": "knn", "n_features": 5, "params": {}}))
    with pytest.raises(MatcherError, match="version"):
        load_model(path)
