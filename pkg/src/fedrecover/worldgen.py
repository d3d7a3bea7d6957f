"""Synthetic ground-truth worlds.

A world is a set of class-conditional diagonal Gaussians (the global
distribution), realized as balanced train/test pools, plus a "foundation"
pool drawn from the same Gaussians but pushed through a shared affine
style gap x -> A*x + b. The foundation pool stands in for the broad,
off-domain corpus a pretrained generative model was fitted on.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import Dataset, RngStream, derive_stream, format_float, load_dataset, save_dataset


@dataclass
class WorldSpec:
    class_count: int
    dim: int
    class_means: np.ndarray   # (C, d)
    class_stds: np.ndarray    # (C, d), all > 0
    separation: float         # radius of the sphere the means were drawn on
    gap_scale: np.ndarray     # (d,), all > 0
    gap_shift: np.ndarray     # (d,)
    n_train: int
    n_test: int
    n_foundation: int

    def __post_init__(self):
        self.class_means = np.asarray(self.class_means, dtype=np.float64)
        self.class_stds = np.asarray(self.class_stds, dtype=np.float64)
        self.gap_scale = np.asarray(self.gap_scale, dtype=np.float64)
        self.gap_shift = np.asarray(self.gap_shift, dtype=np.float64)
        C, d = self.class_count, self.dim
        if self.class_means.shape != (C, d) or self.class_stds.shape != (C, d):
            raise ValueError("class_means/class_stds must have shape (class_count, dim)")
        if self.gap_scale.shape != (d,) or self.gap_shift.shape != (d,):
            raise ValueError("gap_scale/gap_shift must have shape (dim,)")
        if np.any(self.class_stds <= 0):
            raise ValueError("all class stds must be positive")
        if np.any(self.gap_scale <= 0):
            raise ValueError("all gap scale entries must be positive")
        for pools in ("n_train", "n_test", "n_foundation"):
            if getattr(self, pools) < C:
                raise ValueError(f"{pools} must be >= class_count")
        dists = np.linalg.norm(self.class_means[:, None] - self.class_means[None, :], axis=-1)
        if C > 1 and np.min(dists[np.triu_indices(C, k=1)]) == 0.0:
            raise ValueError("class means must be pairwise distinct")


@dataclass
class World:
    spec: WorldSpec
    train_pool: Dataset       # true domain
    test_pool: Dataset        # true domain
    foundation_pool: Dataset  # gap domain: A*x + b


def random_world_spec(
    class_count: int,
    dim: int,
    separation: float,
    sigma: float,
    gap_scale: float,
    gap_shift: float,
    n_train: int,
    n_test: int,
    n_foundation: int,
    stream: RngStream,
    mean_offset: float = 0.0,
    sigma_spread: float = 1.0,
) -> WorldSpec:
    """Draw class means once, uniformly on a radius-`separation` hypersphere.

    The sphere is centered at mean_offset * ones(d): a nonzero offset gives
    uncentered features (as real image statistics are), which is what lets a
    single-class local update drag every logit toward the owned class.
    With sigma_spread > 1, per-class stds are drawn log-uniformly from
    sigma * [1/sqrt(spread), sqrt(spread)], so Bayes boundaries are curved
    and a linear head underfits the way a fixed backbone does.
    """
    if sigma_spread < 1.0:
        raise ValueError(f"sigma_spread must be >= 1, got {sigma_spread}")
    rng = stream.generator
    center = np.full(dim, float(mean_offset))
    for _ in range(100):
        raw = rng.standard_normal((class_count, dim))
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        if np.any(norms == 0):
            continue
        means = center + separation * raw / norms
        dists = np.linalg.norm(means[:, None] - means[None, :], axis=-1)
        if class_count == 1 or np.min(dists[np.triu_indices(class_count, k=1)]) > 1e-6 * separation:
            break
    else:
        raise RuntimeError("failed to draw pairwise-distinct class means")
    half = 0.5 * np.log(sigma_spread)
    class_sigmas = sigma * np.exp(rng.uniform(-half, half, class_count))
    return WorldSpec(
        class_count=class_count,
        dim=dim,
        class_means=means,
        class_stds=np.repeat(class_sigmas[:, None], dim, axis=1),
        separation=float(separation),
        gap_scale=np.full(dim, float(gap_scale)),
        gap_shift=np.full(dim, float(gap_shift)),
        n_train=n_train,
        n_test=n_test,
        n_foundation=n_foundation,
    )


def _balanced_counts(n: int, class_count: int) -> np.ndarray:
    counts = np.full(class_count, n // class_count, dtype=np.int64)
    counts[: n % class_count] += 1
    return counts


def _draw_pool(spec: WorldSpec, n: int, stream: RngStream, tag: str) -> Dataset:
    counts = _balanced_counts(n, spec.class_count)
    feats, labels = [], []
    for c in range(spec.class_count):
        z = stream.child(tag, c).generator.standard_normal((counts[c], spec.dim))
        feats.append(spec.class_means[c] + spec.class_stds[c] * z)
        labels.append(np.full(counts[c], c, dtype=np.int64))
    return Dataset(np.concatenate(feats), np.concatenate(labels), spec.class_count)


def build_world(spec: WorldSpec, stream: RngStream) -> World:
    """Sample the train/test pools and the style-gapped foundation pool."""
    train = _draw_pool(spec, spec.n_train, stream, "train")
    test = _draw_pool(spec, spec.n_test, stream, "test")
    base = _draw_pool(spec, spec.n_foundation, stream, "foundation")
    gapped = Dataset(
        spec.gap_scale * base.features + spec.gap_shift, base.labels, spec.class_count
    )
    return World(spec, train, test, gapped)


# Preset worlds. small10 mirrors a 10-class image-subset setup at desk scale;
# separation/offset were calibrated so the task is learnable yet extreme label
# skew still collapses plain weighted averaging (see the acceptance suite).
_PRESETS = {
    "small10": dict(
        class_count=10, dim=16, separation=2.4, sigma=1.0, mean_offset=1.5,
        gap_scale=1.5, gap_shift=0.5,
        n_train=2000, n_test=1000, n_foundation=20000,
    ),
    "wide100": dict(
        class_count=100, dim=32, separation=4.0, sigma=1.0, mean_offset=1.5,
        gap_scale=1.5, gap_shift=0.5,
        n_train=10000, n_test=5000, n_foundation=50000,
    ),
    "single-label-demo": dict(
        class_count=10, dim=8, separation=2.4, sigma=1.0, mean_offset=1.5,
        gap_scale=1.5, gap_shift=0.5,
        n_train=1000, n_test=500, n_foundation=10000,
    ),
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def default_world(preset: str, seed: int) -> World:
    """Build one of the named preset worlds from a root seed."""
    if preset not in _PRESETS:
        raise ValueError(f"unknown world preset {preset!r}; expected one of {preset_names()}")
    params = _PRESETS[preset]
    spec = random_world_spec(stream=derive_stream(seed, ("world-spec", preset)), **params)
    return build_world(spec, derive_stream(seed, ("world-pools", preset)))


# ---------------------------------------------------------------------------
# Serialization: spec header file plus one dataset file per pool
# ---------------------------------------------------------------------------

def save_world(dir_path, world: World) -> None:
    os.makedirs(dir_path, exist_ok=True)
    spec = world.spec
    with open(os.path.join(dir_path, "world_spec.csv"), "w") as fh:
        fh.write(f"class_count,{spec.class_count}\n")
        fh.write(f"dim,{spec.dim}\n")
        fh.write(f"separation,{format_float(spec.separation)}\n")
        fh.write(f"n_train,{spec.n_train}\n")
        fh.write(f"n_test,{spec.n_test}\n")
        fh.write(f"n_foundation,{spec.n_foundation}\n")
        fh.write("gap_scale," + ",".join(format_float(v) for v in spec.gap_scale) + "\n")
        fh.write("gap_shift," + ",".join(format_float(v) for v in spec.gap_shift) + "\n")
        for c in range(spec.class_count):
            fh.write(f"mean,{c}," + ",".join(format_float(v) for v in spec.class_means[c]) + "\n")
        for c in range(spec.class_count):
            fh.write(f"std,{c}," + ",".join(format_float(v) for v in spec.class_stds[c]) + "\n")
    save_dataset(os.path.join(dir_path, "train.csv"), world.train_pool)
    save_dataset(os.path.join(dir_path, "test.csv"), world.test_pool)
    save_dataset(os.path.join(dir_path, "foundation.csv"), world.foundation_pool)


def load_world(dir_path) -> World:
    scalars = {}
    vectors = {}
    means = {}
    stds = {}
    with open(os.path.join(dir_path, "world_spec.csv")) as fh:
        for line in fh:
            toks = line.strip().split(",")
            if toks[0] in ("mean", "std"):
                (means if toks[0] == "mean" else stds)[int(toks[1])] = [float(t) for t in toks[2:]]
            elif toks[0] in ("gap_scale", "gap_shift"):
                vectors[toks[0]] = [float(t) for t in toks[1:]]
            else:
                scalars[toks[0]] = toks[1]
    C = int(scalars["class_count"])
    spec = WorldSpec(
        class_count=C,
        dim=int(scalars["dim"]),
        class_means=np.array([means[c] for c in range(C)]),
        class_stds=np.array([stds[c] for c in range(C)]),
        separation=float(scalars["separation"]),
        gap_scale=np.array(vectors["gap_scale"]),
        gap_shift=np.array(vectors["gap_shift"]),
        n_train=int(scalars["n_train"]),
        n_test=int(scalars["n_test"]),
        n_foundation=int(scalars["n_foundation"]),
    )
    return World(
        spec,
        load_dataset(os.path.join(dir_path, "train.csv")),
        load_dataset(os.path.join(dir_path, "test.csv")),
        load_dataset(os.path.join(dir_path, "foundation.csv")),
    )
