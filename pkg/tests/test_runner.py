import numpy as np
import pytest
from dataclasses import replace

from fedrecover.config import ExperimentConfig
from fedrecover.core import derive_stream
from fedrecover.metrics import RoundRecord
from fedrecover.runner import (
    _accuracy_trend_ok,
    build_configured_partition,
    build_configured_world,
    run_centralized_baseline,
    run_experiment,
)
from fedrecover.worldgen import random_world_spec


def tiny_config(**kw):
    return replace(
        ExperimentConfig(
            preset="single-label-demo", mode="dirichlet", clients=4, beta=0.5,
            rounds=2, strategy="regl-tf", target_per_class=30, pers_epochs=1, seed=5,
        ),
        **kw,
    )


def test_run_experiment_deterministic():
    a = run_experiment(tiny_config())
    b = run_experiment(tiny_config())
    assert np.array_equal(a.final_params.theta, b.final_params.theta)
    assert a.final_accuracy == b.final_accuracy
    assert a.personalization.mean_best == b.personalization.mean_best


def test_run_experiment_records_w2_pairs():
    res = run_experiment(tiny_config(strategy="regl-ft"), personalize=False)
    assert len(res.client_w2) == 4
    for pair in res.client_w2:
        assert pair is not None
        w2_found, w2_used = pair
        assert w2_found > 0
    none_res = run_experiment(tiny_config(strategy="none", rounds=1), personalize=False)
    assert all(p is None for p in none_res.client_w2)


def test_inline_world_config():
    cfg = tiny_config(preset="", class_count=4, dim=6, separation=2.0, sigma=1.0,
                      n_train=200, n_test=100, n_foundation=1000,
                      clients=2, strategy="none", rounds=1, pers_epochs=0)
    res = run_experiment(cfg)
    assert res.world.spec.class_count == 4
    assert res.world.spec.dim == 6
    assert len(res.rounds) == 1


def test_partition_builder_applies_injection():
    cfg = tiny_config(rho=0.25)
    world = build_configured_world(cfg)
    bare = build_configured_partition(tiny_config(), world)
    fat = build_configured_partition(cfg, world)
    n_k = world.train_pool.label_histogram()
    gained = fat.label_histograms - bare.label_histograms
    expected = (0.25 * n_k).astype(int)
    assert np.all(gained == expected[None, :])


def test_trend_flag():
    def records(values):
        return [RoundRecord(i, v, np.zeros(2)) for i, v in enumerate(values)]

    rising = np.linspace(0.1, 0.9, 40)
    assert _accuracy_trend_ok(records(rising))
    sagging = np.concatenate([np.linspace(0.5, 0.2, 20), np.linspace(0.2, 0.9, 20)])
    assert not _accuracy_trend_ok(records(sagging))
    assert _accuracy_trend_ok(records([0.5, 0.4, 0.6]))  # too short to judge


def test_centralized_baseline_beats_chance():
    params, acc = run_centralized_baseline(tiny_config(rounds=30), tail_window=20)
    assert acc > 0.4
    params2, acc2 = run_centralized_baseline(tiny_config(rounds=30), tail_window=20)
    assert np.array_equal(params.theta, params2.theta)
    assert acc == acc2


def test_sigma_spread_varies_class_stds():
    spec = random_world_spec(
        class_count=8, dim=4, separation=2.0, sigma=1.0, gap_scale=1.5, gap_shift=0.5,
        n_train=80, n_test=80, n_foundation=80,
        stream=derive_stream(3, []), sigma_spread=4.0,
    )
    per_class = spec.class_stds[:, 0]
    assert np.all(spec.class_stds == per_class[:, None])  # constant across dims
    assert per_class.max() / per_class.min() > 1.2
    assert np.all(per_class >= 0.5) and np.all(per_class <= 2.0)
    with pytest.raises(ValueError):
        random_world_spec(
            class_count=2, dim=2, separation=1.0, sigma=1.0, gap_scale=1.0,
            gap_shift=0.0, n_train=4, n_test=4, n_foundation=4,
            stream=derive_stream(0, []), sigma_spread=0.5,
        )
