import numpy as np
import pytest

from fedrecover.core import Dataset, derive_stream
from fedrecover.learner import ModelParams, init_params, params_size
from fedrecover.metrics import accuracy, class_accuracy, label_histogram_report
from fedrecover.partition import dirichlet_partition, iid_partition, single_label_partition
from fedrecover.worldgen import default_world


def constant_predictor(cls, d, C):
    theta = np.zeros(params_size("softmax", d, C))
    theta[d * C + cls] = 100.0  # huge bias on one class
    return ModelParams("softmax", theta, d, C)


def balanced_pool(per_class=20, C=10, d=3, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(C), per_class)
    return Dataset(rng.standard_normal((per_class * C, d)), labels, C)


def test_constant_predictor_on_balanced_data():
    data = balanced_pool()
    p = constant_predictor(0, 3, 10)
    assert accuracy(p, data) == 0.1
    per_class = class_accuracy(p, data)
    assert per_class[0] == 1.0
    assert np.all(per_class[1:] == 0.0)


def test_perfect_linear_separation():
    X = np.concatenate([np.full((30, 1), -3.0), np.full((30, 1), 3.0)])
    y = np.concatenate([np.zeros(30, dtype=int), np.ones(30, dtype=int)])
    data = Dataset(X, y, 2)
    p = ModelParams("softmax", np.array([-5.0, 5.0, 0.0, 0.0]), 1, 2)
    assert accuracy(p, data) == 1.0


def test_random_init_is_chance_level():
    # Monte Carlo chance-level band on the balanced small10 test pool
    world = default_world("small10", seed=0)
    for seed in range(10):
        p = init_params("softmax", 16, 10, 0, derive_stream(seed, ["acc"]))
        assert 0.05 <= accuracy(p, world.test_pool) <= 0.20


def test_class_accuracy_nan_for_absent_class():
    data = Dataset(np.zeros((4, 2)), np.array([0, 0, 2, 2]), 3)
    per_class = class_accuracy(constant_predictor(0, 2, 3), data)
    assert per_class[0] == 1.0
    assert np.isnan(per_class[1])
    assert per_class[2] == 0.0


def test_overall_equals_frequency_weighted_class_means():
    rng = np.random.default_rng(5)
    for trial in range(20):
        C = int(rng.integers(2, 6))
        n = int(rng.integers(5, 60))
        data = Dataset(rng.standard_normal((n, 4)), rng.integers(0, C, n), C)
        theta = rng.standard_normal(params_size("softmax", 4, C))
        p = ModelParams("softmax", theta, 4, C)
        per_class = class_accuracy(p, data)
        freqs = data.label_histogram() / n
        present = ~np.isnan(per_class)
        assert np.isclose(accuracy(p, data), np.sum(freqs[present] * per_class[present]))


def test_mean_class_accuracy_on_balanced_equals_overall():
    data = balanced_pool(per_class=15, C=4)
    rng = np.random.default_rng(2)
    p = ModelParams("softmax", rng.standard_normal(params_size("softmax", 3, 4)), 3, 4)
    assert np.isclose(class_accuracy(p, data).mean(), accuracy(p, data))


def test_accuracy_rejects_empty():
    p = constant_predictor(0, 2, 3)
    with pytest.raises(ValueError):
        accuracy(p, Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), 3))


def test_histogram_report_iid():
    pool = balanced_pool(per_class=200)
    part = iid_partition(pool, 5, derive_stream(0, []))
    rows = label_histogram_report(part)
    assert len(rows) == 50
    assert all(count == 40 for _, _, count in rows)


def test_histogram_report_single_label_diagonal():
    pool = balanced_pool(per_class=30)
    part = single_label_partition(pool, derive_stream(0, []))
    rows = label_histogram_report(part)
    assert len(rows) == 10
    assert all(client == cls for client, cls, _ in rows)


def test_histogram_report_conserves_pool():
    pool = balanced_pool(per_class=50)
    part = dirichlet_partition(pool, 7, 0.2, derive_stream(3, []))
    rows = label_histogram_report(part)
    assert len(rows) <= 7 * 10
    per_class = np.zeros(10, dtype=int)
    for _, cls, count in rows:
        per_class[cls] += count
    assert np.all(per_class == 50)
