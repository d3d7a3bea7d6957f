"""Splitting the train pool across clients under label-skew regimes.

Supported regimes: Dirichlet(beta) label skew, the extreme one-class-per-client
split, and IID. A partition can then be augmented with a fraction of globally
redistributed samples, and mirrored onto the test pool so each client gets a
local test split with the same per-class train:test ratio.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, RngStream, format_float


@dataclass
class Partition:
    """Per-client index sets over the train pool (and optionally the test pool)."""

    client_count: int
    class_count: int
    train_indices: list  # list of int64 arrays into the train pool
    label_histograms: np.ndarray  # (M, C) counts, duplicates counted
    test_indices: list = field(default_factory=list)  # list of int64 arrays into the test pool
    test_scale: np.ndarray = None  # (C,) demand-scaling factors from mirroring

    def __post_init__(self):
        if len(self.train_indices) != self.client_count:
            raise ValueError("need one train index list per client")
        self.train_indices = [np.asarray(ix, dtype=np.int64) for ix in self.train_indices]
        self.label_histograms = np.asarray(self.label_histograms, dtype=np.int64)
        if self.label_histograms.shape != (self.client_count, self.class_count):
            raise ValueError("label_histograms must have shape (client_count, class_count)")
        if not self.test_indices:
            self.test_indices = [np.zeros(0, dtype=np.int64) for _ in range(self.client_count)]
        self.test_indices = [np.asarray(ix, dtype=np.int64) for ix in self.test_indices]
        if self.test_scale is None:
            self.test_scale = np.ones(self.class_count)
        self.test_scale = np.asarray(self.test_scale, dtype=np.float64)

    def client_sizes(self) -> np.ndarray:
        return np.array([len(ix) for ix in self.train_indices], dtype=np.int64)


def _histograms(pool: Dataset, index_lists) -> np.ndarray:
    return np.stack(
        [np.bincount(pool.labels[ix], minlength=pool.class_count) for ix in index_lists]
    ).astype(np.int64)


def _class_indices(pool: Dataset) -> list:
    return [np.flatnonzero(pool.labels == c) for c in range(pool.class_count)]


def largest_remainder_counts(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer allocation of `total` by `proportions`: floor all, then hand the
    remainder out in decreasing order of fractional part (ties to lower index)."""
    target = np.asarray(proportions, dtype=np.float64) * total
    base = np.floor(target).astype(np.int64)
    frac = target - base
    shortfall = int(total - base.sum())
    order = np.lexsort((np.arange(len(base)), -frac))
    base[order[:shortfall]] += 1
    return base


def dirichlet_partition(
    pool: Dataset, client_count: int, beta: float, stream: RngStream,
    require_nonempty: bool = False,
) -> Partition:
    """Allocate each class across clients by a Dirichlet(beta) proportion vector.

    Per class k, p ~ Dir_M(beta) is drawn as normalized Gamma(beta, 1) variates
    and the class's pool indices are split into contiguous blocks sized by the
    largest-remainder rounding of p * n_k. With require_nonempty, the whole
    partition is redrawn (up to 100 times) while any client is globally empty.
    """
    if client_count < 1:
        raise ValueError(f"client_count must be >= 1, got {client_count}")
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if len(pool) == 0:
        raise ValueError("cannot partition an empty pool")
    rng = stream.generator
    per_class = _class_indices(pool)
    for _ in range(100):
        assigned = [[] for _ in range(client_count)]
        for idx_k in per_class:
            if len(idx_k) == 0:
                continue
            gamma = rng.gamma(beta, 1.0, client_count)
            while gamma.sum() == 0.0:  # tiny beta can underflow every variate
                gamma = rng.gamma(beta, 1.0, client_count)
            counts = largest_remainder_counts(gamma / gamma.sum(), len(idx_k))
            stops = np.cumsum(counts)
            for m in range(client_count):
                assigned[m].append(idx_k[stops[m] - counts[m]: stops[m]])
        lists = [np.concatenate(a) if a else np.zeros(0, dtype=np.int64) for a in assigned]
        if not require_nonempty or all(len(ix) > 0 for ix in lists):
            return Partition(client_count, pool.class_count, lists, _histograms(pool, lists))
    raise RuntimeError(
        f"could not produce non-empty clients after 100 redraws "
        f"(beta={beta}, clients={client_count})"
    )


def single_label_partition(pool: Dataset, stream: RngStream) -> Partition:
    """One client per class; client m owns all and only class-m samples."""
    lists = _class_indices(pool)
    return Partition(pool.class_count, pool.class_count, lists, _histograms(pool, lists))


def iid_partition(pool: Dataset, client_count: int, stream: RngStream) -> Partition:
    """Shuffle each class and deal it out as evenly as possible."""
    if client_count < 1:
        raise ValueError(f"client_count must be >= 1, got {client_count}")
    rng = stream.generator
    assigned = [[] for _ in range(client_count)]
    for idx_k in _class_indices(pool):
        shuffled = rng.permutation(idx_k)
        for m, block in enumerate(np.array_split(shuffled, client_count)):
            assigned[m].append(block)
    lists = [np.concatenate(a) if a else np.zeros(0, dtype=np.int64) for a in assigned]
    return Partition(client_count, pool.class_count, lists, _histograms(pool, lists))


def inject_global_fraction(
    part: Partition, pool: Dataset, rho: float, stream: RngStream
) -> Partition:
    """Hand every client floor(rho * n_k) pool samples of each class k.

    Each client draws without replacement from the full class index set, so
    clients may share injected samples (server-side redistribution at desk
    scale); rho=0 returns the partition unchanged.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if rho == 0.0:
        return part
    per_class = _class_indices(pool)
    lists = []
    for m in range(part.client_count):
        rng = stream.child("inject", m).generator
        extra = [
            rng.choice(idx_k, size=int(rho * len(idx_k)), replace=False)
            for idx_k in per_class
            if len(idx_k) > 0
        ]
        lists.append(np.concatenate([part.train_indices[m], *extra]))
    return Partition(
        part.client_count, part.class_count, lists, _histograms(pool, lists),
        test_indices=[ix.copy() for ix in part.test_indices],
        test_scale=part.test_scale.copy(),
    )


def mirror_test_split(part: Partition, test_pool: Dataset, stream: RngStream) -> Partition:
    """Give each client a test split matching its per-class train:test ratio.

    Demand for client m, class k is round(train_mk * n_test_k / n_train_k);
    if a class is over-demanded (rounding), all demands for it are scaled down
    proportionally and the factor recorded in test_scale. Test indices are
    dealt without replacement, so client test splits are disjoint.
    """
    if test_pool.class_count != part.class_count:
        raise ValueError("test pool class count does not match partition")
    rng = stream.generator
    train_totals = part.label_histograms.sum(axis=0)
    test_counts = test_pool.label_histogram()
    demands = np.zeros((part.client_count, part.class_count), dtype=np.int64)
    scale = np.ones(part.class_count)
    for k in range(part.class_count):
        if train_totals[k] == 0:
            continue
        raw = np.rint(part.label_histograms[:, k] * (test_counts[k] / train_totals[k]))
        total = int(raw.sum())
        if total > test_counts[k]:
            scale[k] = test_counts[k] / total
            raw = np.floor(raw * scale[k])
        demands[:, k] = raw.astype(np.int64)
    assigned = [[] for _ in range(part.client_count)]
    for k, idx_k in enumerate(_class_indices(test_pool)):
        shuffled = rng.permutation(idx_k)
        pos = 0
        for m in range(part.client_count):
            take = demands[m, k]
            assigned[m].append(shuffled[pos: pos + take])
            pos += take
    test_lists = [
        np.concatenate(a) if a else np.zeros(0, dtype=np.int64) for a in assigned
    ]
    return Partition(
        part.client_count, part.class_count,
        [ix.copy() for ix in part.train_indices],
        part.label_histograms.copy(),
        test_indices=test_lists,
        test_scale=scale,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def save_partition(path, part: Partition) -> None:
    """Text rows: train/test index assignments plus explicit histograms."""
    with open(path, "w") as fh:
        fh.write(f"clients,{part.client_count},classes,{part.class_count}\n")
        for m, ix in enumerate(part.train_indices):
            for i in ix:
                fh.write(f"train,{m},{i}\n")
        for m, ix in enumerate(part.test_indices):
            for i in ix:
                fh.write(f"test,{m},{i}\n")
        for m in range(part.client_count):
            for c in range(part.class_count):
                fh.write(f"hist,{m},{c},{part.label_histograms[m, c]}\n")
        for c in range(part.class_count):
            fh.write(f"scale,{c},{format_float(part.test_scale[c])}\n")


def load_partition(path) -> Partition:
    with open(path) as fh:
        head = fh.readline().strip().split(",")
        if len(head) != 4 or head[0] != "clients" or head[2] != "classes":
            raise ValueError(f"{path}: bad partition header")
        clients, classes = int(head[1]), int(head[3])
        train = [[] for _ in range(clients)]
        test = [[] for _ in range(clients)]
        hist = np.zeros((clients, classes), dtype=np.int64)
        scale = np.ones(classes)
        for line in fh:
            toks = line.strip().split(",")
            if toks[0] == "train":
                train[int(toks[1])].append(int(toks[2]))
            elif toks[0] == "test":
                test[int(toks[1])].append(int(toks[2]))
            elif toks[0] == "hist":
                hist[int(toks[1]), int(toks[2])] = int(toks[3])
            elif toks[0] == "scale":
                scale[int(toks[1])] = float(toks[2])
            else:
                raise ValueError(f"{path}: unknown partition row kind {toks[0]!r}")
    return Partition(
        clients, classes,
        [np.array(ix, dtype=np.int64) for ix in train],
        hist,
        test_indices=[np.array(ix, dtype=np.int64) for ix in test],
        test_scale=scale,
    )
