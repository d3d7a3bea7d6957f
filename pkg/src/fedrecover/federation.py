"""Server orchestration: weighted parameter averaging over rounds, plus the
per-client personalization phase.

Client updates are pure functions of (global params, client data, derived
stream), and aggregation always sums in client-index order, so running the
clients of a round sequentially or in a thread pool yields bit-identical
results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, NumericsError, RngStream, concat_datasets, empty_dataset
from .genmodel import Generator, adapt, estimate_gap, plan_synthesis, synthesize
from .learner import ModelParams, TrainConfig, local_update
from .metrics import RoundRecord, accuracy, class_accuracy
from .partition import Partition
from .worldgen import World

STRATEGIES = ("none", "regl-tf", "regl-ft")


@dataclass
class FedConfig:
    rounds: int
    participation: float = 1.0
    strategy: str = "none"
    target_per_class: int = 0
    alpha: float = 0.8
    pers_epochs: int = 50
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if not 0.0 < self.participation <= 1.0:
            raise ValueError(f"participation must lie in (0, 1], got {self.participation}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.target_per_class < 0:
            raise ValueError(f"target_per_class must be >= 0, got {self.target_per_class}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.pers_epochs < 0:
            raise ValueError(f"pers_epochs must be >= 0, got {self.pers_epochs}")


@dataclass
class ClientState:
    client_id: int
    real: Dataset
    synthetic: Dataset
    combined: Dataset
    generator: Generator | None  # the generator used for synthesis, if any
    test_indices: np.ndarray
    local_test: Dataset
    gap_estimated: bool = False  # regl-ft: False means fell back to foundation


def prepare_clients(
    world: World,
    part: Partition,
    cfg: FedConfig,
    foundation: Generator,
    stream: RngStream,
) -> list[ClientState]:
    """Materialize each client's real data and its synthetic complement.

    Strategy none leaves the synthetic set empty; regl-tf synthesizes from
    the foundation generator as-is; regl-ft first estimates the style gap
    from local real data (falling back to the raw foundation for clients
    where no class has >= 2 samples) and synthesizes from the adapted model.
    """
    clients = []
    for m in range(part.client_count):
        real = world.train_pool.subset(part.train_indices[m])
        gen_used = None
        gap_estimated = False
        if cfg.strategy == "none":
            synth = empty_dataset(world.spec.class_count, world.spec.dim)
        else:
            gen_used = foundation
            if cfg.strategy == "regl-ft" and np.any(real.label_histogram() >= 2):
                gap = estimate_gap(foundation, real)
                gen_used = adapt(foundation, gap, cfg.alpha)
                gap_estimated = True
            plan = plan_synthesis(real.label_histogram(), cfg.target_per_class)
            pieces = [
                synthesize(gen_used, c, int(plan[c]), stream.child("synth", m, c))
                for c in range(world.spec.class_count)
                if plan[c] > 0
            ]
            synth = (
                concat_datasets(pieces)
                if pieces
                else empty_dataset(world.spec.class_count, world.spec.dim)
            )
        combined = concat_datasets([real, synth]) if len(synth) else real
        test_idx = part.test_indices[m]
        clients.append(
            ClientState(
                client_id=m,
                real=real,
                synthetic=synth,
                combined=combined,
                generator=gen_used,
                test_indices=test_idx,
                local_test=world.test_pool.subset(test_idx),
                gap_estimated=gap_estimated,
            )
        )
    return clients


def aggregate(local_params: list[tuple[ModelParams, float]]) -> ModelParams:
    """Weighted parameter average with weights N_m / sum(N_m).

    Summation runs in list (client-index) order so the result is bit-stable
    no matter how the local updates were computed.
    """
    if not local_params:
        raise ValueError("aggregate needs at least one client")
    first = local_params[0][0]
    total = 0.0
    for params, weight in local_params:
        if weight < 0:
            raise ValueError(f"negative aggregation weight {weight}")
        if (
            params.arch != first.arch
            or params.theta.shape != first.theta.shape
            or (params.dim, params.class_count, params.hidden)
            != (first.dim, first.class_count, first.hidden)
        ):
            raise ValueError("all client params must share one architecture and shape")
        total += weight
    if total <= 0:
        raise ValueError("aggregation weights sum to zero")
    theta = np.zeros_like(first.theta)
    for params, weight in local_params:
        theta += (weight / total) * params.theta
    return ModelParams(first.arch, theta, first.dim, first.class_count, first.hidden)


def _run_client(args):
    global_params, client, train_cfg, stream = args
    return local_update(global_params, client.combined, train_cfg, stream)


def run_generalization(
    clients: list[ClientState],
    cfg: FedConfig,
    world: World,
    stream: RngStream,
    init_params: ModelParams,
    workers: int = 1,
) -> tuple[ModelParams, list[RoundRecord]]:
    """FedAvg over cfg.rounds rounds, recording global test metrics each round.

    Each round samples ceil(participation * M) clients without replacement,
    runs local SGD on every selected client that has data, and averages with
    weights |combined local set|. Clients with empty data are skipped.
    """
    if not clients:
        raise ValueError("run_generalization needs at least one client")
    M = len(clients)
    take = math.ceil(cfg.participation * M)
    global_params = init_params
    records = []
    for r in range(cfg.rounds):
        chosen = np.sort(stream.child("select", r).generator.choice(M, size=take, replace=False))
        active = [m for m in chosen if len(clients[m].combined) > 0]
        jobs = [
            (global_params, clients[m], cfg.train, stream.child("round", r, "client", m))
            for m in active
        ]
        if workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                updated = list(pool.map(_run_client, jobs))
        else:
            updated = [_run_client(job) for job in jobs]
        for params, m in zip(updated, active):
            if not np.all(np.isfinite(params.theta)):
                raise NumericsError(f"client {m} produced non-finite params at round {r}")
        if updated:
            global_params = aggregate(
                [(p, float(len(clients[m].combined))) for p, m in zip(updated, active)]
            )
        if not np.all(np.isfinite(global_params.theta)):
            raise NumericsError(f"non-finite global params at round {r}")
        records.append(
            RoundRecord(
                round_index=r,
                global_accuracy=accuracy(global_params, world.test_pool),
                class_accuracies=class_accuracy(global_params, world.test_pool),
            )
        )
    return global_params, records


@dataclass
class PersonalizationResult:
    client_params: list          # ModelParams per client, None where skipped
    best_accuracy: np.ndarray    # (M,), NaN where skipped
    included: np.ndarray         # (M,) bool
    mean_best: float


def _personalize_client(args):
    global_params, client, cfg, stream = args
    if len(client.local_test) == 0 or len(client.combined) == 0:
        return None, np.nan
    best = accuracy(global_params, client.local_test)
    params = global_params
    epoch_cfg = TrainConfig(
        lr=cfg.train.lr, batch_size=cfg.train.batch_size,
        local_epochs=1, shuffle=cfg.train.shuffle,
    )
    for _ in range(cfg.pers_epochs):
        params = local_update(params, client.combined, epoch_cfg, stream)
        if not np.all(np.isfinite(params.theta)):
            raise NumericsError(f"client {client.client_id} diverged while personalizing")
        best = max(best, accuracy(params, client.local_test))
    return params, best


def run_personalization(
    global_params: ModelParams,
    clients: list[ClientState],
    cfg: FedConfig,
    stream: RngStream,
    workers: int = 1,
) -> PersonalizationResult:
    """Fine-tune the global model per client, tracking each client's best
    local-test accuracy over epochs (epoch 0 = the global model itself).

    Clients with an empty local test split (or no data at all) are flagged
    NaN and excluded from the mean.
    """
    jobs = [
        (global_params, c, cfg, stream.child("pers", c.client_id)) for c in clients
    ]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_personalize_client, jobs))
    else:
        results = [_personalize_client(job) for job in jobs]
    best = np.array([acc for _, acc in results])
    included = ~np.isnan(best)
    if not included.any():
        raise ValueError("personalization needs at least one client with a local test split")
    return PersonalizationResult(
        client_params=[p for p, _ in results],
        best_accuracy=best,
        included=included,
        mean_best=float(best[included].mean()),
    )
