"""End-to-end experiment orchestration: world -> partition -> synthesis ->
federated rounds -> personalization, all keyed off one root seed."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .core import derive_stream
from .federation import (
    FedConfig,
    PersonalizationResult,
    prepare_clients,
    run_generalization,
    run_personalization,
)
from .genmodel import Generator, fit_foundation, w2_to_global
from .learner import ModelParams, TrainConfig, init_params, local_update
from .metrics import accuracy
from .partition import (
    Partition,
    dirichlet_partition,
    iid_partition,
    inject_global_fraction,
    mirror_test_split,
    single_label_partition,
)
from .worldgen import World, build_world, default_world, random_world_spec


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    world: World
    partition: Partition
    foundation: Generator
    clients: list
    final_params: ModelParams
    rounds: list  # RoundRecord per round
    personalization: PersonalizationResult | None
    client_w2: list  # (w2_foundation, w2_used) per client, or None for strategy none
    trend_first_half_nondecreasing: bool
    wall_time_s: float

    @property
    def final_accuracy(self) -> float:
        return self.rounds[-1].global_accuracy


def build_configured_world(cfg: ExperimentConfig) -> World:
    if cfg.preset:
        return default_world(cfg.preset, cfg.seed)
    spec = random_world_spec(
        class_count=cfg.class_count, dim=cfg.dim, separation=cfg.separation,
        sigma=cfg.sigma, gap_scale=cfg.gap_scale, gap_shift=cfg.gap_shift,
        n_train=cfg.n_train, n_test=cfg.n_test, n_foundation=cfg.n_foundation,
        stream=derive_stream(cfg.seed, ("world-spec", "inline")),
        mean_offset=cfg.mean_offset, sigma_spread=cfg.sigma_spread,
    )
    return build_world(spec, derive_stream(cfg.seed, ("world-pools", "inline")))


def build_configured_partition(cfg: ExperimentConfig, world: World) -> Partition:
    if cfg.mode == "dirichlet":
        part = dirichlet_partition(
            world.train_pool, cfg.clients, cfg.beta,
            derive_stream(cfg.seed, ("partition",)),
            require_nonempty=cfg.strict_nonempty,
        )
    elif cfg.mode == "single-label":
        part = single_label_partition(world.train_pool, derive_stream(cfg.seed, ("partition",)))
    else:
        part = iid_partition(world.train_pool, cfg.clients, derive_stream(cfg.seed, ("partition",)))
    if cfg.rho > 0:
        part = inject_global_fraction(
            part, world.train_pool, cfg.rho, derive_stream(cfg.seed, ("inject",))
        )
    return mirror_test_split(part, world.test_pool, derive_stream(cfg.seed, ("mirror",)))


def fed_config(cfg: ExperimentConfig) -> FedConfig:
    return FedConfig(
        rounds=cfg.rounds,
        participation=cfg.participation,
        strategy=cfg.strategy,
        target_per_class=cfg.target_per_class,
        alpha=cfg.alpha,
        pers_epochs=cfg.pers_epochs,
        train=TrainConfig(
            lr=cfg.lr, batch_size=cfg.batch_size,
            local_epochs=cfg.local_epochs, shuffle=cfg.shuffle,
        ),
    )


def _accuracy_trend_ok(records: list, window: int = 10) -> bool:
    """Flag: is the 10-round moving average non-decreasing over the first half?"""
    acc = np.array([r.global_accuracy for r in records])
    if len(acc) < 2 * window:
        return True
    moving = np.convolve(acc, np.ones(window) / window, mode="valid")
    half = moving[: max(2, len(moving) // 2)]
    return bool(np.all(np.diff(half) >= -1e-12))


def run_centralized_baseline(
    cfg: ExperimentConfig, tail_window: int = 250
) -> tuple[ModelParams, float]:
    """Train one model on the full train pool for rounds * local_epochs epochs.

    The readout is the Polyak tail average of the last `tail_window` epoch
    iterates: constant-rate SGD orbits its plateau, and the averaged iterate
    is the counterpart of the model averaging federated arms get for free.
    Returns (averaged params, test accuracy of the averaged params).
    """
    world = build_configured_world(cfg)
    params = init_params(
        cfg.arch, world.spec.dim, world.spec.class_count,
        cfg.hidden if cfg.arch == "mlp1" else 0,
        derive_stream(cfg.seed, ("init",)),
    )
    epoch_cfg = TrainConfig(lr=cfg.lr, batch_size=cfg.batch_size,
                            local_epochs=1, shuffle=cfg.shuffle)
    stream = derive_stream(cfg.seed, ("centralized",))
    total = cfg.rounds * cfg.local_epochs
    tail = []
    for epoch in range(total):
        params = local_update(params, world.train_pool, epoch_cfg, stream)
        if epoch >= total - tail_window:
            tail.append(params.theta)
    averaged = ModelParams(
        params.arch, np.mean(tail, axis=0), params.dim, params.class_count, params.hidden
    )
    return averaged, accuracy(averaged, world.test_pool)


def run_experiment(cfg: ExperimentConfig, personalize: bool = True) -> ExperimentResult:
    start = time.perf_counter()
    world = build_configured_world(cfg)
    part = build_configured_partition(cfg, world)
    foundation = fit_foundation(world.foundation_pool)
    fcfg = fed_config(cfg)
    clients = prepare_clients(world, part, fcfg, foundation, derive_stream(cfg.seed, ("prepare",)))
    init = init_params(
        cfg.arch, world.spec.dim, world.spec.class_count,
        cfg.hidden if cfg.arch == "mlp1" else 0,
        derive_stream(cfg.seed, ("init",)),
    )
    final, records = run_generalization(
        clients, fcfg, world, derive_stream(cfg.seed, ("federation",)), init,
        workers=cfg.workers,
    )
    pers = None
    if personalize:
        pers = run_personalization(
            final, clients, fcfg, derive_stream(cfg.seed, ("personalization",)),
            workers=cfg.workers,
        )
    if cfg.strategy == "none":
        client_w2 = [None] * len(clients)
    else:
        _, w2_foundation = w2_to_global(foundation, world)
        client_w2 = [(w2_foundation, w2_to_global(c.generator, world)[1]) for c in clients]
    return ExperimentResult(
        config=cfg,
        world=world,
        partition=part,
        foundation=foundation,
        clients=clients,
        final_params=final,
        rounds=records,
        personalization=pers,
        client_w2=client_w2,
        trend_first_half_nondecreasing=_accuracy_trend_ok(records),
        wall_time_s=time.perf_counter() - start,
    )
