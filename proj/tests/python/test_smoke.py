"""Smoke tests for the Python bindings: each exposed operation runs and
returns sane, deterministic values. Heavy correctness testing lives in the
C++ suites; these only prove the binding layer."""

import json
import math

import pytest

import fedrouter


def test_kmeans_recovers_two_obvious_clusters():
    points = [[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]
    result = fedrouter.fit_kmeans(points, k=2, seed=7)
    assert result["inertia"] == pytest.approx(1.0, abs=1e-12)
    assert sorted(c[0] for c in result["centroids"]) == pytest.approx([0.0, 10.0])
    a = result["assignments"]
    assert a[0] == a[1] and a[2] == a[3] and a[0] != a[2]


def test_silhouette_matches_hand_computation():
    points = [[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]
    b = (10.0 + math.sqrt(101.0)) / 2.0
    expected = (b - 1.0) / b
    assert fedrouter.silhouette_score(points, [0, 0, 1, 1]) == pytest.approx(
        expected, abs=1e-12
    )


def test_select_k_finds_the_blob_count():
    import random

    rng = random.Random(3)
    points = []
    for cx, cy in [(0, 0), (20, 0), (0, 20), (20, 20)]:
        points.extend(
            [[cx + rng.gauss(0, 1), cy + rng.gauss(0, 1)] for _ in range(20)]
        )
    result = fedrouter.select_k(points, k_min=2, k_max=6, seed=5)
    assert result["best_k"] == 4
    assert [k for k, _ in result["scores"]] == [2, 3, 4, 5, 6]


def test_adapter_trains_and_evaluates():
    import random

    rng = random.Random(11)
    embeddings, labels = [], []
    for _ in range(200):
        label = rng.randrange(2)
        sign = 4.0 if label else -4.0
        embeddings.append([sign + rng.gauss(0, 0.5), rng.gauss(0, 0.3)])
        labels.append(label)

    adapter = fedrouter.train_adapter(
        embeddings, labels, class_count=2, learning_rate=0.05, steps=200, seed=9
    )
    assert adapter["steps_trained"] == 200
    result = fedrouter.evaluate_adapter(
        adapter["weights"], adapter["bias"], embeddings, labels
    )
    assert result["accuracy"] >= 0.99
    assert result["mean_loss"] < math.log(2.0)

    again = fedrouter.train_adapter(
        embeddings, labels, class_count=2, learning_rate=0.05, steps=200, seed=9
    )
    assert again["weights"] == adapter["weights"]  # seeded determinism


SMALL_CONFIG = {
    "rounds": 3,
    "train_per_client": 120,
    "test_per_client": 60,
}


def test_simulate_returns_per_round_metrics():
    cfg = json.dumps(SMALL_CONFIG)
    rounds = fedrouter.simulate(cfg, method="fedrouter", scenario="single", seed=1)
    assert len(rounds) == 3
    for i, rec in enumerate(rounds):
        assert rec["round"] == i
        assert 0.0 <= rec["overall_acc"] <= 1.0
        assert rec["routing_acc"] is not None
        assert set(rec["per_task_acc"]) == {0, 1, 2, 3}
    # Baselines do not route.
    baseline = fedrouter.simulate(cfg, method="fedavg", scenario="single", seed=1)
    assert baseline[-1]["routing_acc"] is None
    # Same cell, same numbers.
    rerun = fedrouter.simulate(cfg, method="fedrouter", scenario="single", seed=1)
    assert rerun == rounds


def test_simulate_rejects_unknown_settings():
    with pytest.raises(ValueError):
        fedrouter.simulate(json.dumps({"boost": 9}), "fedrouter", "single", 1)
    with pytest.raises(ValueError):
        fedrouter.simulate(json.dumps(SMALL_CONFIG), "fedsgd", "single", 1)


def test_run_experiment_writes_artifacts(tmp_path):
    cfg = dict(SMALL_CONFIG)
    cfg.update(
        {
            "methods": ["fedrouter", "fedavg"],
            "scenarios": ["single"],
            "seeds": [1],
            "out_dir": str(tmp_path / "out"),
        }
    )
    result = fedrouter.run_experiment(json.dumps(cfg))
    assert {row["method"] for row in result["summary"]} == {"fedrouter", "fedavg"}
    for row in result["summary"]:
        assert row["n_seeds"] == 1
        assert row["std"] is None  # sample std undefined for one seed
    out = tmp_path / "out"
    assert (out / "metrics.jsonl").exists()
    assert (out / "summary.csv").exists()
    assert (out / "trace.csv").exists()

    header = (out / "metrics.jsonl").read_text().splitlines()[0]
    assert header.startswith("# config_hash=")
    assert fedrouter.config_hash(json.dumps(cfg)) in header
