"""Delimited report files and the figures rendered alongside them.

All numeric cells use the shortest exact decimal rendering of the float64
value, so re-running an identical config reproduces every file byte for
byte. Figures are drawn from the same data as the tables; wall time goes
to a separate meta file because it is the one genuinely non-deterministic
output.
"""

from __future__ import annotations

import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .config import ExperimentConfig, config_from_sections, config_to_sections
from .core import format_float
from .metrics import label_histogram_report
from .partition import Partition
from .runner import ExperimentResult

FIG_DPI = 110


# ---------------------------------------------------------------------------
# delimited outputs
# ---------------------------------------------------------------------------

def write_rounds_csv(path, records, class_count: int) -> None:
    with open(path, "w") as fh:
        cols = ",".join(f"acc_class_{c}" for c in range(class_count))
        fh.write(f"round,global_accuracy,{cols}\n")
        for r in records:
            cells = ",".join(format_float(v) for v in r.class_accuracies)
            fh.write(f"{r.round_index},{format_float(r.global_accuracy)},{cells}\n")


def write_partition_csv(path, part: Partition) -> None:
    with open(path, "w") as fh:
        fh.write("client,class,count\n")
        for client, cls, count in label_histogram_report(part):
            fh.write(f"{client},{cls},{count}\n")


def write_summary_csv(path, result: ExperimentResult) -> None:
    cfg = result.config
    with open(path, "w") as fh:
        fh.write("key,value\n")
        fh.write(f"seed,{cfg.seed}\n")
        fh.write(f"final_global_accuracy,{format_float(result.final_accuracy)}\n")
        if result.personalization is not None:
            pers = result.personalization
            fh.write(f"mean_personalized_accuracy,{format_float(pers.mean_best)}\n")
            for m, best in enumerate(pers.best_accuracy):
                fh.write(f"personalized_accuracy_client_{m},{format_float(best)}\n")
        for m, pair in enumerate(result.client_w2):
            if pair is None:
                continue
            fh.write(f"w2_foundation_client_{m},{format_float(pair[0])}\n")
            fh.write(f"w2_generator_client_{m},{format_float(pair[1])}\n")
        flag = "true" if result.trend_first_half_nondecreasing else "false"
        fh.write(f"trend_first_half_nondecreasing,{flag}\n")
        # echo the experiment config; [run] holds execution-environment knobs
        # (out_dir, workers, plots) that do not affect any metric, and seed
        # already has its own row above
        for section, pairs in config_to_sections(cfg).items():
            if section == "run":
                continue
            for key, value in pairs.items():
                fh.write(f"config.{section}.{key},{value}\n")


def read_summary(path) -> dict:
    out = {}
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "key,value":
            raise ValueError(f"{path}: not a summary file")
        for line in fh:
            key, value = line.rstrip("\n").split(",", 1)
            out[key] = value
    return out


def config_from_summary(path) -> ExperimentConfig:
    """Re-parse the config echo in a summary file.

    Reconstructs the full experiment config (seed comes from the dedicated
    summary row); execution-environment fields keep their defaults.
    """
    rows = read_summary(path)
    sections: dict = {}
    for key, value in rows.items():
        if not key.startswith("config."):
            continue
        _, section, name = key.split(".", 2)
        sections.setdefault(section, {})[name] = value
    sections.setdefault("run", {})["seed"] = rows["seed"]
    return config_from_sections(sections)


def write_meta(path, result: ExperimentResult) -> None:
    with open(path, "w") as fh:
        fh.write(f"wall_time_s,{result.wall_time_s:.3f}\n")


def write_sweep_csv(path, axis: str, rows) -> None:
    """rows: (value, final accuracy, mean personalized accuracy or nan)."""
    with open(path, "w") as fh:
        fh.write(f"{axis},final_global_accuracy,mean_personalized_accuracy\n")
        for value, acc, pers in rows:
            cell = str(value) if isinstance(value, int) else format_float(value)
            fh.write(f"{cell},{format_float(acc)},{format_float(pers)}\n")


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def plot_rounds(path, records) -> None:
    rounds = [r.round_index for r in records]
    acc = [r.global_accuracy for r in records]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(rounds, acc, lw=1.5)
    ax.set_xlabel("communication round")
    ax.set_ylabel("global test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def plot_partition(path, part: Partition) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    im = ax.imshow(part.label_histograms, aspect="auto", cmap="viridis")
    ax.set_xlabel("class")
    ax.set_ylabel("client")
    ax.set_yticks(range(part.client_count))
    fig.colorbar(im, ax=ax, label="samples")
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


def plot_sweep(path, axis: str, rows) -> None:
    values = [float(v) for v, _, _ in rows]
    acc = [a for _, a, _ in rows]
    pers = [p for _, _, p in rows]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(values, acc, "o-", label="generalization")
    if not all(math.isnan(p) for p in pers):
        ax.plot(values, pers, "s--", label="personalization")
    ax.set_xlabel(axis)
    ax.set_ylabel("accuracy")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=FIG_DPI)
    plt.close(fig)


# ---------------------------------------------------------------------------
# one run -> one directory
# ---------------------------------------------------------------------------

def write_run_outputs(out_dir, result: ExperimentResult, plots: bool = True) -> list:
    """Write rounds/summary/partition files (and figures) for one run."""
    os.makedirs(out_dir, exist_ok=True)
    C = result.world.spec.class_count
    written = []

    rounds_path = os.path.join(out_dir, "rounds.csv")
    write_rounds_csv(rounds_path, result.rounds, C)
    written.append(rounds_path)

    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(summary_path, result)
    written.append(summary_path)

    partition_path = os.path.join(out_dir, "partition.csv")
    write_partition_csv(partition_path, result.partition)
    written.append(partition_path)

    write_meta(os.path.join(out_dir, "meta.txt"), result)

    if plots:
        rounds_png = os.path.join(out_dir, "rounds.png")
        plot_rounds(rounds_png, result.rounds)
        written.append(rounds_png)
        partition_png = os.path.join(out_dir, "partition.png")
        plot_partition(partition_png, result.partition)
        written.append(partition_png)
    return written
