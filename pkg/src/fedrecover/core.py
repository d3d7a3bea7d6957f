"""Shared domain types: labeled feature datasets and deterministic RNG streams.

Every random draw in the simulator comes from an RngStream derived from a
root seed plus a context path (round, client id, purpose tag, ...), so any
piece of work reproduces exactly regardless of execution schedule.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

_MASK64 = (1 << 64) - 1


class NumericsError(RuntimeError):
    """Raised when training or aggregation produces non-finite values."""


class Sample(NamedTuple):
    features: np.ndarray
    label: int


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------

def _path_key(entry) -> int:
    """Map a path entry (int or str tag) to a stable uint32 spawn key."""
    if isinstance(entry, (bool, float)):
        raise TypeError(f"rng path entries must be int or str, got {entry!r}")
    if isinstance(entry, (int, np.integer)):
        return int(entry) & 0xFFFFFFFF
    if isinstance(entry, str):
        digest = hashlib.sha256(entry.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "little")
    raise TypeError(f"rng path entries must be int or str, got {entry!r}")


@dataclass
class RngStream:
    """A deterministic random stream keyed by (root_seed, path).

    Identical (root_seed, path) pairs always yield identical draw sequences;
    different paths give independent streams. The underlying generator is
    counter-based (Philox), so deriving streams is cheap and order-free.
    A stream is consumed by exactly one logical task at a time.
    """

    root_seed: int
    path: tuple
    generator: np.random.Generator

    def child(self, *path) -> "RngStream":
        """Derive an independent sub-stream with additional path context."""
        return derive_stream(self.root_seed, (*self.path, *path))


def derive_stream(root_seed: int, path: Iterable = ()) -> RngStream:
    path = tuple(path)
    keys = tuple(_path_key(p) for p in path)
    seq = np.random.SeedSequence(entropy=int(root_seed) & _MASK64, spawn_key=keys)
    return RngStream(int(root_seed), path, np.random.Generator(np.random.Philox(seq)))


def standard_normal_vector(stream: RngStream, d: int) -> np.ndarray:
    """Draw d i.i.d. standard-normal values, advancing the stream."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    return stream.generator.standard_normal(d)


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """An ordered, immutable collection of labeled feature vectors."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray    # (n,) int64 in [0, class_count)
    class_count: int

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError(
                f"labels shape {labels.shape} does not match {features.shape[0]} samples"
            )
        if self.class_count < 1:
            raise ValueError(f"class_count must be >= 1, got {self.class_count}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise ValueError(
                f"labels must lie in [0, {self.class_count}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def __iter__(self) -> Iterator[Sample]:
        for i in range(len(self)):
            yield Sample(self.features[i], int(self.labels[i]))

    def label_histogram(self) -> np.ndarray:
        """Per-class sample counts, length class_count."""
        return np.bincount(self.labels, minlength=self.class_count).astype(np.int64)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_count)


def empty_dataset(class_count: int, dim: int) -> Dataset:
    return Dataset(np.zeros((0, dim)), np.zeros(0, dtype=np.int64), class_count)


def concat_datasets(parts: Iterable[Dataset]) -> Dataset:
    parts = list(parts)
    if not parts:
        raise ValueError("cannot concatenate zero datasets")
    class_count = parts[0].class_count
    dim = parts[0].dim
    for p in parts[1:]:
        if p.class_count != class_count or p.dim != dim:
            raise ValueError("datasets disagree on class_count or dim")
    return Dataset(
        np.concatenate([p.features for p in parts], axis=0),
        np.concatenate([p.labels for p in parts]),
        class_count,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def format_float(v: float) -> str:
    """Shortest decimal string that round-trips the float64 exactly."""
    return repr(float(v))


def save_dataset(path, ds: Dataset) -> None:
    """Write a dataset as text: header line "C,d,n", then rows "label,f1,...,fd"."""
    with open(path, "w") as fh:
        fh.write(f"{ds.class_count},{ds.dim},{len(ds)}\n")
        for i in range(len(ds)):
            row = ",".join(format_float(v) for v in ds.features[i])
            fh.write(f"{ds.labels[i]},{row}\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            class_count, dim, n = (int(tok) for tok in header.split(","))
        except ValueError:
            raise ValueError(f"{path}: bad dataset header {header!r}") from None
        features = np.zeros((n, dim))
        labels = np.zeros(n, dtype=np.int64)
        for i in range(n):
            toks = fh.readline().strip().split(",")
            if len(toks) != dim + 1:
                raise ValueError(f"{path}: row {i} has {len(toks) - 1} features, expected {dim}")
            labels[i] = int(toks[0])
            features[i] = [float(t) for t in toks[1:]]
    return Dataset(features, labels, class_count)
