"""Smoke tests for the python module (built by CMake; PYTHONPATH set by ctest)."""

import math
import os

import numpy as np
import pytest

import mrn


def test_squared_euclidean():
    assert mrn.squared_euclidean(np.zeros(2), np.array([3.0, 4.0])) == 25.0
    a = np.random.default_rng(0).normal(size=8)
    assert mrn.squared_euclidean(a, a) == 0.0


def test_pairwise_matrix_against_numpy():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(6, 4))
    got = mrn.pairwise_squared_euclidean(x)
    expected = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_aggregation_weights():
    w = mrn.aggregation_weights([0.0, math.log(3.0)])
    np.testing.assert_allclose(w, [0.75, 0.25], atol=1e-12)
    w = mrn.aggregation_weights([7.0, 7.0])
    assert list(w) == [0.5, 0.5]
    rng = np.random.default_rng(2)
    w = mrn.aggregation_weights(list(rng.uniform(0, 30, size=9)))
    assert abs(w.sum() - 1.0) < 1e-12
    assert (w >= 0).all()


def test_propagate_hand_case_and_identity():
    slots = np.array([[0.0], [1.0], [4.0]])
    out = mrn.propagate(slots, k=1, depth=1, lam=0.2)
    np.testing.assert_allclose(out.ravel(), [0.8, 0.2, 1.6], atol=1e-15)

    rng = np.random.default_rng(3)
    x = rng.normal(size=(5, 3))
    np.testing.assert_array_equal(mrn.propagate(x, k=2, depth=3, lam=1.0), x)
    np.testing.assert_array_equal(mrn.propagate(x, k=0, depth=2, lam=0.2), x)


def test_propagate_against_numpy_reference():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 3))
    k, lam = 2, 0.3

    d = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d, np.inf)
    expected = np.empty_like(x)
    for i in range(6):
        nbrs = np.argsort(d[i], kind="stable")[:k]
        w = np.exp(-(d[i, nbrs] - d[i, nbrs].min()))
        w /= w.sum()
        expected[i] = lam * x[i] + (1 - lam) * (w @ x[nbrs])

    got = mrn.propagate(x, k=k, depth=1, lam=lam)
    np.testing.assert_allclose(got, expected, atol=1e-10)


def test_gradcheck_gate():
    assert mrn.gradcheck(depth=2) < 1e-4


def test_train_evaluate_roundtrip(tmp_path):
    ckpt = str(tmp_path / "model.mrnc")
    overrides = {
        "episode.ways": "3",
        "episode.queries": "4",
        "prop.k": "3",
        "encoder.input_shape": "8",
        "encoder.mlp_dims": "16,8",
        "opt.total_episodes": "150",
        "opt.halve_every": "75",
        "synth.classes": "12",
        "synth.dim": "8",
        "synth.items_per_class": "20",
        "synth.cluster_std": "0.3",
        "out.checkpoint": ckpt,
    }
    assert mrn.train(overrides) == ckpt
    assert os.path.exists(ckpt)

    report = mrn.evaluate(ckpt, episodes=30, seed=5)
    assert report["episodes"] == 30
    assert 0.0 <= report["mean_acc"] <= 1.0
    assert report["ci95"] >= 0.0
    assert len(report["per_episode"]) == 30

    # deterministic given the seed
    again = mrn.evaluate(ckpt, episodes=30, seed=5)
    assert report["per_episode"] == again["per_episode"]

    sim = str(tmp_path / "sim.csv")
    mrn.export_similarity(ckpt, episode_seed=11, out=sim)
    with open(sim) as fh:
        header = fh.readline()
        rows = [line.split(",") for line in fh]
    assert header.startswith("# provenance:")
    assert len(rows) == len(rows[0])  # square matrix


def test_generate_synthetic(tmp_path):
    path = mrn.generate_synthetic(
        classes=10, dim=4, cluster_std=0.2, center_std=1.0, items_per_class=8, seed=1,
        out_dir=str(tmp_path),
    )
    assert os.path.exists(path)
    assert os.path.exists(path + ".manifest")


def test_errors_surface_as_exceptions():
    with pytest.raises(RuntimeError):
        mrn.aggregation_weights([])
    with pytest.raises(RuntimeError):
        mrn.propagate(np.zeros((3, 2)), k=1, depth=1, lam=2.0)
