"""Experiment configuration: a flat INI-style key = value format with one
section per module, strict about unknown keys so typos fail loudly."""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .core import format_float
from .federation import STRATEGIES
from .learner import ARCHS
from .worldgen import preset_names

PARTITION_MODES = ("dirichlet", "single-label", "iid")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class ExperimentConfig:
    # world
    preset: str = "small10"
    class_count: int = 10
    dim: int = 16
    separation: float = 2.4
    sigma: float = 1.0
    sigma_spread: float = 1.0
    mean_offset: float = 1.5
    gap_scale: float = 1.5
    gap_shift: float = 0.5
    n_train: int = 2000
    n_test: int = 1000
    n_foundation: int = 20000
    # partition
    mode: str = "dirichlet"
    clients: int = 5
    beta: float = 0.5
    rho: float = 0.0
    strict_nonempty: bool = False
    # federation
    rounds: int = 100
    participation: float = 1.0
    strategy: str = "regl-ft"
    target_per_class: int = 200
    alpha: float = 0.8
    pers_epochs: int = 50
    # train
    arch: str = "mlp1"
    hidden: int = 7
    lr: float = 0.1
    batch_size: int = 128
    local_epochs: int = 5
    shuffle: bool = True
    # run
    seed: int = 0
    out_dir: str = "out"
    workers: int = 1
    plots: bool = True


# section -> key -> (attribute, type)
_SCHEMA = {
    "world": {
        "preset": ("preset", str),
        "class_count": ("class_count", int),
        "dim": ("dim", int),
        "separation": ("separation", float),
        "sigma": ("sigma", float),
        "sigma_spread": ("sigma_spread", float),
        "mean_offset": ("mean_offset", float),
        "gap_scale": ("gap_scale", float),
        "gap_shift": ("gap_shift", float),
        "n_train": ("n_train", int),
        "n_test": ("n_test", int),
        "n_foundation": ("n_foundation", int),
    },
    "partition": {
        "mode": ("mode", str),
        "clients": ("clients", int),
        "beta": ("beta", float),
        "rho": ("rho", float),
        "strict_nonempty": ("strict_nonempty", bool),
    },
    "federation": {
        "rounds": ("rounds", int),
        "participation": ("participation", float),
        "strategy": ("strategy", str),
        "target_per_class": ("target_per_class", int),
        "alpha": ("alpha", float),
        "pers_epochs": ("pers_epochs", int),
    },
    "train": {
        "arch": ("arch", str),
        "hidden": ("hidden", int),
        "lr": ("lr", float),
        "batch_size": ("batch_size", int),
        "local_epochs": ("local_epochs", int),
        "shuffle": ("shuffle", bool),
    },
    "run": {
        "seed": ("seed", int),
        "out_dir": ("out_dir", str),
        "workers": ("workers", int),
        "plots": ("plots", bool),
    },
}

_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}

# axes the sweep harness may vary, mapped to config attributes
SWEEP_AXES = {
    "beta": ("beta", float),
    "rho": ("rho", float),
    "clients": ("clients", int),
    "local_epochs": ("local_epochs", int),
    "target_per_class": ("target_per_class", int),
    "alpha": ("alpha", float),
}


def _coerce(section: str, key: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[raw.lower()]
        return typ(raw)
    except ValueError:
        raise ConfigError(
            f"{section}.{key}: cannot parse {raw!r} as {typ.__name__}"
        ) from None


def config_from_sections(sections: dict) -> ExperimentConfig:
    """Build and validate a config from {section: {key: raw string}}."""
    cfg = ExperimentConfig()
    for section, pairs in sections.items():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in pairs.items():
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            attr, typ = _SCHEMA[section][key]
            setattr(cfg, attr, _coerce(section, key, raw, typ))
    validate_config(cfg)
    return cfg


def effective_class_count(cfg: ExperimentConfig) -> int:
    if cfg.preset:
        from .worldgen import _PRESETS

        return _PRESETS[cfg.preset]["class_count"]
    return cfg.class_count


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
    sections = {s: dict(parser.items(s)) for s in parser.sections()}
    return config_from_sections(sections)


def validate_config(cfg: ExperimentConfig) -> None:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}")

    if cfg.preset and cfg.preset not in preset_names():
        bad("world.preset", f"unknown preset {cfg.preset!r}; expected one of "
            f"{preset_names()} (or empty for an inline world)")
    if not cfg.preset:
        if cfg.class_count < 1:
            bad("world.class_count", "must be >= 1")
        if cfg.dim < 1:
            bad("world.dim", "must be >= 1")
        if cfg.sigma <= 0:
            bad("world.sigma", "must be positive")
        if cfg.sigma_spread < 1.0:
            bad("world.sigma_spread", "must be >= 1")
        if cfg.gap_scale <= 0:
            bad("world.gap_scale", "must be positive")
        for name in ("n_train", "n_test", "n_foundation"):
            if getattr(cfg, name) < cfg.class_count:
                bad(f"world.{name}", "must be >= class_count")
    if cfg.mode not in PARTITION_MODES:
        bad("partition.mode", f"unknown mode {cfg.mode!r}; expected one of {PARTITION_MODES}")
    if cfg.clients < 1:
        bad("partition.clients", "must be >= 1")
    if cfg.mode == "single-label":
        C = effective_class_count(cfg)
        if cfg.clients != C:
            bad("partition.clients", f"single-label mode needs clients == class count ({C})")
    if cfg.beta <= 0:
        bad("partition.beta", "must be positive")
    if not 0.0 <= cfg.rho <= 1.0:
        bad("partition.rho", "must lie in [0, 1]")
    if cfg.rounds < 1:
        bad("federation.rounds", "must be >= 1")
    if not 0.0 < cfg.participation <= 1.0:
        bad("federation.participation", "must lie in (0, 1]")
    if cfg.strategy not in STRATEGIES:
        bad("federation.strategy", f"unknown strategy {cfg.strategy!r}; expected one of {STRATEGIES}")
    if cfg.target_per_class < 0:
        bad("federation.target_per_class", "must be >= 0")
    if not 0.0 <= cfg.alpha <= 1.0:
        bad("federation.alpha", "must lie in [0, 1]")
    if cfg.pers_epochs < 0:
        bad("federation.pers_epochs", "must be >= 0")
    if cfg.arch not in ARCHS:
        bad("train.arch", f"unknown arch {cfg.arch!r}; expected one of {ARCHS}")
    if cfg.arch == "mlp1" and cfg.hidden < 1:
        bad("train.hidden", "must be >= 1 for mlp1")
    if cfg.lr < 0:
        bad("train.lr", "must be >= 0")
    if cfg.batch_size < 1:
        bad("train.batch_size", "must be >= 1")
    if cfg.local_epochs < 1:
        bad("train.local_epochs", "must be >= 1")
    if cfg.workers < 1:
        bad("run.workers", "must be >= 1")


def config_to_sections(cfg: ExperimentConfig) -> dict:
    """Canonical string rendering, the inverse of config_from_sections."""
    out = {}
    for section, keys in _SCHEMA.items():
        rendered = {}
        for key, (attr, typ) in keys.items():
            value = getattr(cfg, attr)
            if typ is float:
                rendered[key] = format_float(value)
            elif typ is bool:
                rendered[key] = "true" if value else "false"
            else:
                rendered[key] = str(value)
        out[section] = rendered
    return out


def save_config(path, cfg: ExperimentConfig) -> None:
    with open(path, "w") as fh:
        for section, pairs in config_to_sections(cfg).items():
            fh.write(f"[{section}]\n")
            for key, value in pairs.items():
                fh.write(f"{key} = {value}\n")
            fh.write("\n")
