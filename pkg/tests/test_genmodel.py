import numpy as np
import pytest

from fedrecover.core import Dataset, derive_stream
from fedrecover.genmodel import (
    GapEstimate,
    Generator,
    adapt,
    estimate_gap,
    fit_foundation,
    load_generator,
    plan_synthesis,
    save_generator,
    synthesize,
    w2_to_global,
)
from fedrecover.worldgen import build_world, default_world
from tests.test_worldgen import make_spec


def gaussian_dataset(means, stds, per_class, stream, C=None):
    means = np.atleast_2d(means)
    stds = np.atleast_2d(stds)
    C = C or means.shape[0]
    feats, labels = [], []
    for c in range(means.shape[0]):
        z = stream.generator.standard_normal((per_class, means.shape[1]))
        feats.append(means[c] + stds[c] * z)
        labels.append(np.full(per_class, c))
    return Dataset(np.concatenate(feats), np.concatenate(labels), C)


def test_fit_hand_moments():
    ds = Dataset(np.array([[0.0, 0.0], [2.0, 2.0]]), np.array([0, 0]), 1)
    gen = fit_foundation(ds)
    assert np.allclose(gen.means[0], [1.0, 1.0])
    assert np.allclose(gen.stds[0], [np.sqrt(2.0), np.sqrt(2.0)])  # unbiased estimator


def test_fit_recovers_moments_within_ci():
    mu, sigma, n = np.array([[3.0, -1.0]]), np.array([[2.0, 0.5]]), 10_000
    ds = gaussian_dataset(mu, sigma, n, derive_stream(0, ["fit"]))
    gen = fit_foundation(ds)
    assert np.all(np.abs(gen.means[0] - mu[0]) < 3 * sigma[0] / np.sqrt(n))
    assert np.all(np.abs(gen.stds[0] - sigma[0]) < 3 * sigma[0] / np.sqrt(2 * n))


def test_fit_floors_degenerate_std():
    ds = Dataset(np.ones((5, 2)), np.zeros(5, dtype=int), 1)
    gen = fit_foundation(ds)
    assert np.all(gen.stds[0] == 1e-6)


def test_fit_rejects_underpopulated_class():
    ds = Dataset(np.zeros((3, 2)), np.array([0, 0, 1]), 3)
    with pytest.raises(ValueError, match="class"):
        fit_foundation(ds)


def test_synthesize_zero_and_floored():
    gen = Generator(2, 2, np.array([[1.0, 2.0], [3.0, 4.0]]), np.full((2, 2), 1e-6))
    assert len(synthesize(gen, 0, 0, derive_stream(0, []))) == 0
    out = synthesize(gen, 1, 5, derive_stream(0, []))
    assert np.all(np.abs(out.features - gen.means[1]) < 1e-5)
    assert np.all(out.labels == 1)


def test_synthesize_moments_converge():
    world = default_world("small10", seed=3)
    gen = fit_foundation(world.foundation_pool)
    out = synthesize(gen, 4, 10_000, derive_stream(1, ["syn"]))
    se = gen.stds[4] / np.sqrt(10_000)
    assert np.all(np.abs(out.features.mean(axis=0) - gen.means[4]) < 3 * se)
    assert np.all(np.abs(out.features.std(axis=0, ddof=1) - gen.stds[4]) < 3 * se)


def test_synthesize_rejects_bad_class():
    gen = Generator(2, 1, np.zeros((2, 1)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        synthesize(gen, 2, 1, derive_stream(0, []))


def test_plan_tops_up_to_target():
    hist = np.array([200, 0, 37, 400])
    assert plan_synthesis(hist, 200).tolist() == [0, 200, 163, 0]
    assert plan_synthesis(hist, 0).tolist() == [0, 0, 0, 0]
    # a 50-sample class with a 1300 target needs 1250 synthetic samples
    assert plan_synthesis(np.array([50]), 1300).tolist() == [1250]


def fitted_pair(seed, per_class_local=500, owned=3, C=10, d=16, scale=1.5, shift=0.5):
    """Foundation generator from a gapped pool + true-domain local data."""
    world = default_world("small10", seed=seed)
    foundation = fit_foundation(world.foundation_pool)
    spec = world.spec
    local = gaussian_dataset(
        spec.class_means[:owned], spec.class_stds[:owned], per_class_local,
        derive_stream(seed, ["local"]), C=C,
    )
    return world, foundation, local


def test_estimate_gap_recovers_affine_transform():
    # Monte Carlo oracle: average the estimate over 20 seeds; the mean scale
    # must land within 5% of 1.5 and the mean shift within 0.1 of 0.5
    scales, shifts = [], []
    for seed in range(20):
        _, foundation, local = fitted_pair(seed)
        est = estimate_gap(foundation, local)
        assert est.source_class_count == 3
        scales.append(est.scale_hat)
        shifts.append(est.shift_hat)
    mean_scale = np.mean(scales, axis=0)
    mean_shift = np.mean(shifts, axis=0)
    assert np.all(np.abs(mean_scale - 1.5) < 0.075)
    assert np.all(np.abs(mean_shift - 0.5) < 0.1)


def test_estimate_gap_identity_world():
    spec = make_spec(C=3, d=4, means=np.eye(3, 4) * 3.0, n_train=300, n_test=300,
                     n_foundation=30_000)
    world = build_world(spec, derive_stream(5, ["w"]))
    foundation = fit_foundation(world.foundation_pool)
    est = estimate_gap(foundation, world.train_pool)
    assert np.all(np.abs(est.scale_hat - 1.0) < 0.1)
    assert np.all(np.abs(est.shift_hat) < 0.2)


def test_estimate_gap_single_owned_class():
    _, foundation, local = fitted_pair(2, owned=1, per_class_local=800)
    est = estimate_gap(foundation, local)
    assert est.source_class_count == 1
    assert np.all(est.scale_hat > 0)
    assert np.all(np.abs(est.scale_hat - 1.5) < 0.25)


def test_estimate_gap_rejects_thin_data():
    gen = Generator(2, 1, np.zeros((2, 1)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        estimate_gap(gen, Dataset(np.zeros((0, 1)), np.zeros(0, dtype=int), 2))
    one_each = Dataset(np.zeros((2, 1)), np.array([0, 1]), 2)
    with pytest.raises(ValueError):
        estimate_gap(gen, one_each)


def test_adapt_alpha_zero_is_identity():
    gen = Generator(2, 2, np.array([[1.0, 2.0], [3.0, 4.0]]), np.ones((2, 2)))
    gap = GapEstimate(np.array([1.5, 1.5]), np.array([0.5, 0.5]), 1)
    out = adapt(gen, gap, 0.0)
    assert np.array_equal(out.means, gen.means)
    assert np.array_equal(out.stds, gen.stds)


def test_adapt_hand_blend():
    # corrected mean (2.0 - 0.5)/1.5 = 1.0, blended 2.0 + 0.8*(1.0 - 2.0) = 1.2
    # corrected std 1.5/1.5 = 1.0, blended 1.5 + 0.8*(1.0 - 1.5) = 1.1
    gen = Generator(1, 1, np.array([[2.0]]), np.array([[1.5]]))
    gap = GapEstimate(np.array([1.5]), np.array([0.5]), 1)
    out = adapt(gen, gap, 0.8)
    assert np.allclose(out.means[0, 0], 1.2)
    assert np.allclose(out.stds[0, 0], 1.1)


def test_adapt_full_blend_with_exact_gap_recovers_world():
    world = default_world("small10", seed=9)
    spec = world.spec
    foundation = fit_foundation(world.foundation_pool)
    exact = GapEstimate(spec.gap_scale.copy(), spec.gap_shift.copy(), spec.class_count)
    out = adapt(foundation, exact, 1.0)
    n_c = len(world.foundation_pool) // spec.class_count
    se = spec.class_stds / np.sqrt(n_c)
    # 4 standard errors: 320 entries are checked at once, 3 se would be
    # expected to produce a stray violation
    assert np.all(np.abs(out.means - spec.class_means) < 4 * se)
    assert np.all(np.abs(out.stds - spec.class_stds) < 4 * se)
    assert np.mean(np.abs(out.means - spec.class_means)) < 1.5 * se.mean()


def test_adapt_monotone_in_alpha():
    gen = Generator(1, 2, np.array([[4.0, -2.0]]), np.array([[2.0, 1.0]]))
    gap = GapEstimate(np.array([2.0, 0.5]), np.array([1.0, -1.0]), 1)
    half = adapt(gen, gap, 0.5)
    full = adapt(gen, gap, 1.0)
    assert np.allclose(half.means, (gen.means + full.means) / 2)
    assert np.allclose(half.stds, (gen.stds + full.stds) / 2)


def test_w2_closed_form():
    world = default_world("small10", seed=1)
    spec = world.spec
    truth = Generator(spec.class_count, spec.dim, spec.class_means.copy(), spec.class_stds.copy())
    per_class, mean = w2_to_global(truth, world)
    assert np.allclose(per_class, 0.0)
    assert mean == 0.0


def test_w2_hand_cases():
    spec = make_spec(C=1, d=1, means=[[1.0]], n_train=1, n_test=1, n_foundation=2)
    world = build_world(spec, derive_stream(0, ["w"]))
    shifted_mean = Generator(1, 1, np.array([[0.0]]), np.array([[1.0]]))
    per_class, _ = w2_to_global(shifted_mean, world)
    assert np.allclose(per_class, [1.0])  # means 0 vs 1, stds equal
    wider = Generator(1, 1, np.array([[1.0]]), np.array([[2.0]]))
    per_class, _ = w2_to_global(wider, world)
    assert np.allclose(per_class, [1.0])  # stds 1 vs 2, means equal


def test_recovery_beats_foundation_with_local_data():
    # a client owning one 600-sample class still improves every class channel
    world, foundation, local = fitted_pair(4, owned=1, per_class_local=600)
    est = estimate_gap(foundation, local)
    adapted = adapt(foundation, est, 1.0)
    w2_adapted, mean_adapted = w2_to_global(adapted, world)
    w2_found, mean_found = w2_to_global(foundation, world)
    assert mean_adapted < mean_found
    # transfer to classes the client does NOT own (the shared-transform payoff)
    assert np.all(w2_adapted[1:] < w2_found[1:])


def test_recovery_ratio_with_abundant_data():
    # alpha=1 and abundant local data shrink mean W2^2 by more than 4x,
    # checked across 10 preset seeds
    for seed in range(10):
        world = default_world("small10", seed=seed)
        foundation = fit_foundation(world.foundation_pool)
        est = estimate_gap(foundation, world.train_pool)
        adapted = adapt(foundation, est, 1.0)
        _, mean_adapted = w2_to_global(adapted, world)
        _, mean_found = w2_to_global(foundation, world)
        assert mean_adapted < 0.25 * mean_found


def test_generator_roundtrip(tmp_path):
    world = default_world("single-label-demo", seed=0)
    gen = fit_foundation(world.foundation_pool)
    path = tmp_path / "gen.csv"
    save_generator(path, gen)
    back = load_generator(path)
    assert back.class_count == gen.class_count
    assert np.array_equal(back.means, gen.means)
    assert np.array_equal(back.stds, gen.stds)
