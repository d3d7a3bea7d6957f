import numpy as np
import pytest
from scipy import stats

from fedrecover.core import derive_stream
from fedrecover.worldgen import WorldSpec, build_world, default_world, random_world_spec


def make_spec(C=2, d=1, means=None, sigma=1.0, gap_scale=1.0, gap_shift=0.0,
              n_train=100, n_test=100, n_foundation=10_000):
    if means is None:
        means = np.array([[-2.0], [2.0]])[:C]
    return WorldSpec(
        class_count=C, dim=d,
        class_means=np.asarray(means, dtype=float),
        class_stds=np.full((C, d), sigma),
        separation=2.0,
        gap_scale=np.full(d, gap_scale),
        gap_shift=np.full(d, gap_shift),
        n_train=n_train, n_test=n_test, n_foundation=n_foundation,
    )


def test_identity_gap_foundation_means_within_ci():
    # sample-mean CI oracle: 3 sigma / sqrt(n_c) around the true means
    world = build_world(make_spec(), derive_stream(0, ["w"]))
    n_c = 5000
    for c, target in [(0, -2.0), (1, 2.0)]:
        x = world.foundation_pool.features[world.foundation_pool.labels == c]
        assert len(x) == n_c
        assert abs(x.mean() - target) < 3.0 / np.sqrt(n_c)


def test_identity_gap_matches_true_domain_ks():
    world = build_world(make_spec(), derive_stream(3, ["w"]))
    stream = derive_stream(99, ["fresh"])
    for c, mu in [(0, -2.0), (1, 2.0)]:
        found = world.foundation_pool.features[world.foundation_pool.labels == c][:, 0]
        ref = mu + stream.generator.standard_normal(len(found))
        assert stats.ks_2samp(found, ref).pvalue >= 0.01


def test_gap_transforms_moments():
    # moment oracle on 1e4 draws: mean 0 -> A*0 + b = 1, std 1 -> A = 2
    spec = make_spec(C=1, d=1, means=[[0.0]], gap_scale=2.0, gap_shift=1.0,
                     n_train=1, n_test=1, n_foundation=10_000)
    world = build_world(spec, derive_stream(1, ["w"]))
    x = world.foundation_pool.features[:, 0]
    n = len(x)
    assert abs(x.mean() - 1.0) < 3 * 2.0 / np.sqrt(n)
    assert abs(x.std(ddof=1) - 2.0) < 3 * 2.0 / np.sqrt(2 * n)


def test_inverse_gap_recovers_true_moments():
    world = default_world("small10", seed=11)
    spec = world.spec
    undone = (world.foundation_pool.features - spec.gap_shift) / spec.gap_scale
    for c in range(spec.class_count):
        x = undone[world.foundation_pool.labels == c]
        se = spec.class_stds[c] / np.sqrt(len(x))
        assert np.all(np.abs(x.mean(axis=0) - spec.class_means[c]) < 4 * se)


def test_pools_are_label_balanced():
    world = default_world("small10", seed=2)
    assert world.train_pool.label_histogram().tolist() == [200] * 10
    assert world.test_pool.label_histogram().tolist() == [100] * 10
    assert world.foundation_pool.label_histogram().tolist() == [2000] * 10


def test_pool_balance_with_remainder():
    spec = make_spec(C=3, d=1, means=[[-2.0], [0.0], [2.0]], n_train=10, n_test=5,
                     n_foundation=7)
    world = build_world(spec, derive_stream(8, ["w"]))
    assert world.train_pool.label_histogram().tolist() == [4, 3, 3]
    assert world.test_pool.label_histogram().tolist() == [2, 2, 1]
    assert world.foundation_pool.label_histogram().tolist() == [3, 2, 2]


def test_small10_preset_shape():
    world = default_world("small10", seed=0)
    assert world.spec.class_count == 10
    assert world.spec.dim == 16
    assert np.allclose(world.spec.gap_scale, 1.5)
    assert np.allclose(world.spec.gap_shift, 0.5)
    assert len(world.train_pool) == 2000


def test_wide100_preset_shape():
    world = default_world("wide100", seed=0)
    assert world.spec.class_count == 100
    assert world.spec.dim == 32


def test_preset_determinism():
    a = default_world("small10", seed=5)
    b = default_world("small10", seed=5)
    assert np.array_equal(a.train_pool.features, b.train_pool.features)
    assert np.array_equal(a.foundation_pool.features, b.foundation_pool.features)
    c = default_world("small10", seed=6)
    assert not np.array_equal(a.train_pool.features, c.train_pool.features)


def test_unknown_preset_rejected():
    with pytest.raises(ValueError, match="preset"):
        default_world("huge", seed=0)


def test_spec_validation():
    with pytest.raises(ValueError):
        make_spec(sigma=0.0)
    with pytest.raises(ValueError):
        make_spec(gap_scale=-1.0)
    with pytest.raises(ValueError):
        make_spec(n_train=1)  # fewer samples than classes
    with pytest.raises(ValueError):
        make_spec(means=[[1.0], [1.0]])  # coincident class means


def test_random_spec_means_on_sphere():
    spec = random_world_spec(
        class_count=6, dim=8, separation=3.0, sigma=1.0, gap_scale=1.5, gap_shift=0.5,
        n_train=60, n_test=60, n_foundation=60, stream=derive_stream(4, []),
    )
    norms = np.linalg.norm(spec.class_means, axis=1)
    assert np.allclose(norms, 3.0)
    dists = np.linalg.norm(spec.class_means[:, None] - spec.class_means[None, :], axis=-1)
    assert dists[np.triu_indices(6, k=1)].min() > 0
