"""Class-conditional Gaussian generator, its style-gap correction, and the
closed-form distribution-recovery metric.

The foundation generator is fitted on the gap-domain pool, so it knows every
class but in the wrong "style" (a shared per-dimension affine offset). A
client estimates that style transform from whatever real classes it owns and
applies the correction to ALL class channels, which is what lets synthesis
recover classes the client has never seen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, RngStream, empty_dataset, load_dataset, save_dataset
from .worldgen import World

STD_FLOOR = 1e-6


@dataclass
class Generator:
    """Per-class diagonal-Gaussian sampler: x = mean_c + std_c * z."""

    class_count: int
    dim: int
    means: np.ndarray  # (C, d)
    stds: np.ndarray   # (C, d), floored at STD_FLOOR

    def __post_init__(self):
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stds = np.asarray(self.stds, dtype=np.float64)
        shape = (self.class_count, self.dim)
        if self.means.shape != shape or self.stds.shape != shape:
            raise ValueError(f"means/stds must have shape {shape}")
        if np.any(self.stds <= 0):
            raise ValueError("generator stds must be positive")


@dataclass
class GapEstimate:
    """Estimated shared affine style gap: generator-domain x = scale*truth + shift."""

    scale_hat: np.ndarray  # (d,), > 0
    shift_hat: np.ndarray  # (d,)
    source_class_count: int  # owned classes the estimate pooled over


def fit_foundation(foundation_pool: Dataset) -> Generator:
    """Fit per-class empirical means and per-dimension stds (unbiased, floored)."""
    C, d = foundation_pool.class_count, foundation_pool.dim
    hist = foundation_pool.label_histogram()
    short = np.flatnonzero(hist < 2)
    if short.size:
        raise ValueError(
            f"every class needs >= 2 foundation samples; classes {short.tolist()} "
            f"have counts {hist[short].tolist()}"
        )
    means = np.zeros((C, d))
    stds = np.zeros((C, d))
    for c in range(C):
        x = foundation_pool.features[foundation_pool.labels == c]
        means[c] = x.mean(axis=0)
        stds[c] = np.maximum(x.std(axis=0, ddof=1), STD_FLOOR)
    return Generator(C, d, means, stds)


def synthesize(gen: Generator, cls: int, n: int, stream: RngStream) -> Dataset:
    """Draw n samples of class `cls` from the generator's Gaussian channel."""
    if not 0 <= cls < gen.class_count:
        raise ValueError(f"class {cls} out of range [0, {gen.class_count})")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return empty_dataset(gen.class_count, gen.dim)
    z = stream.generator.standard_normal((n, gen.dim))
    return Dataset(
        gen.means[cls] + gen.stds[cls] * z,
        np.full(n, cls, dtype=np.int64),
        gen.class_count,
    )


def plan_synthesis(local_hist: np.ndarray, target_per_class: int) -> np.ndarray:
    """Per-class synthetic counts that top every class up to the target."""
    if target_per_class < 0:
        raise ValueError(f"target_per_class must be >= 0, got {target_per_class}")
    hist = np.asarray(local_hist, dtype=np.int64)
    return np.maximum(0, target_per_class - hist)


def estimate_gap(gen: Generator, local_real: Dataset) -> GapEstimate:
    """Estimate the shared style transform from locally owned classes.

    Owned classes are those with >= 2 local samples. Per dimension, the scale
    is the ratio of pooled within-class stds (generator over local real, both
    pooled with the local degrees-of-freedom weights); the shift is the
    count-weighted average over owned classes of mean_c - scale * local_mean_c.
    """
    if len(local_real) == 0:
        raise ValueError("cannot estimate the style gap from an empty dataset")
    if local_real.class_count != gen.class_count or local_real.dim != gen.dim:
        raise ValueError("local data shape does not match the generator")
    hist = local_real.label_histogram()
    owned = np.flatnonzero(hist >= 2)
    if owned.size == 0:
        raise ValueError("gap estimation needs at least one class with >= 2 samples")

    dof = (hist[owned] - 1).astype(np.float64)
    local_var = np.zeros((owned.size, gen.dim))
    local_mean = np.zeros((owned.size, gen.dim))
    for i, c in enumerate(owned):
        x = local_real.features[local_real.labels == c]
        local_mean[i] = x.mean(axis=0)
        local_var[i] = x.var(axis=0, ddof=1)
    pooled_local = np.sqrt(np.average(local_var, axis=0, weights=dof))
    pooled_gen = np.sqrt(np.average(gen.stds[owned] ** 2, axis=0, weights=dof))
    scale_hat = pooled_gen / np.maximum(pooled_local, STD_FLOOR)

    shifts = gen.means[owned] - scale_hat * local_mean
    shift_hat = np.average(shifts, axis=0, weights=hist[owned].astype(np.float64))
    return GapEstimate(scale_hat, shift_hat, int(owned.size))


def adapt(gen: Generator, gap: GapEstimate, alpha: float) -> Generator:
    """Blend every class channel toward its gap-corrected moments.

    The corrected channel is mean* = (mean - shift)/scale, std* = std/scale;
    alpha=0 leaves the generator untouched, alpha=1 applies the full
    correction. Unowned classes are corrected too: the transform is shared.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    corrected_means = (gen.means - gap.shift_hat) / gap.scale_hat
    corrected_stds = gen.stds / gap.scale_hat
    return Generator(
        gen.class_count, gen.dim,
        gen.means + alpha * (corrected_means - gen.means),
        np.maximum(gen.stds + alpha * (corrected_stds - gen.stds), STD_FLOOR),
    )


def w2_to_global(gen: Generator, world: World) -> tuple[np.ndarray, float]:
    """Squared 2-Wasserstein between each generator channel and the true class
    Gaussian (diagonal closed form), plus the mean over classes."""
    spec = world.spec
    if gen.class_count != spec.class_count or gen.dim != spec.dim:
        raise ValueError("generator shape does not match the world")
    per_class = (
        np.sum((gen.means - spec.class_means) ** 2, axis=1)
        + np.sum((gen.stds - spec.class_stds) ** 2, axis=1)
    )
    return per_class, float(per_class.mean())


# ---------------------------------------------------------------------------
# Serialization: one dataset-format file, C mean rows then C std rows
# ---------------------------------------------------------------------------

def save_generator(path, gen: Generator) -> None:
    table = Dataset(
        np.concatenate([gen.means, gen.stds]),
        np.concatenate([np.arange(gen.class_count)] * 2).astype(np.int64),
        gen.class_count,
    )
    save_dataset(path, table)


def load_generator(path) -> Generator:
    table = load_dataset(path)
    C = table.class_count
    if len(table) != 2 * C:
        raise ValueError(f"{path}: generator table must have 2*{C} rows, got {len(table)}")
    expected = np.concatenate([np.arange(C)] * 2)
    if not np.array_equal(table.labels, expected):
        raise ValueError(f"{path}: generator rows must be C means then C stds, in class order")
    return Generator(C, table.dim, table.features[:C].copy(), table.features[C:].copy())
