"""Figure rendering for the report path: every delimited artifact the CLI
writes gets a PNG companion here. Plain matplotlib on the Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 120


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_class_distribution(counts: dict[str, int], path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    names = list(counts.keys())
    values = [counts[n] for n in names]
    ax.bar(range(len(names)), values, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("records")
    ax.set_title("Class distribution")
    ax.set_yscale("log" if max(values) / max(min(values), 1) > 50 else "linear")
    return _save(fig, path)


def save_f1_curve(trace_steps, path) -> Path:
    """Weighted and macro F1 against candidate set size from a search trace."""
    sizes = [len(s.features) for s in trace_steps]
    wf1 = [s.weighted_f1 for s in trace_steps]
    mf1 = [s.macro_f1 for s in trace_steps]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(sizes, wf1, marker="o", ms=3, label="weighted F1")
    ax.plot(sizes, mf1, marker="s", ms=3, label="macro F1")
    ax.set_xlabel("features in candidate set")
    ax.set_ylabel("F1 (%)")
    ax.set_title("F1 vs. number of features")
    ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def save_metric_bars(tables: dict[str, "MetricTable"], path) -> Path:
    """One panel per table: grouped precision/recall/F1 bars per class."""
    n = len(tables)
    fig, axes = plt.subplots(1, n, figsize=(4.5 * n, 4), squeeze=False)
    for ax, (title, table) in zip(axes[0], tables.items()):
        x = np.arange(len(table.classes))
        width = 0.27
        ax.bar(x - width, table.precision, width, label="precision")
        ax.bar(x, table.recall, width, label="recall")
        ax.bar(x + width, table.f1, width, label="F1")
        ax.set_xticks(x)
        ax.set_xticklabels(table.classes, rotation=30, ha="right", fontsize=7)
        ax.set_ylim(0, 105)
        ax.set_title(title, fontsize=9)
        ax.grid(axis="y", alpha=0.3)
    axes[0][0].set_ylabel("percent")
    axes[0][-1].legend(fontsize=8)
    return _save(fig, path)


def save_timing_bars(timings: dict[str, "TimingBreakdown"], path) -> Path:
    """Train-time per level for each setting (hierarchical vs flat)."""
    fig, ax = plt.subplots(figsize=(7, 4))
    width = 0.8 / max(len(timings), 1)
    for i, (setting, timing) in enumerate(timings.items()):
        levels = list(range(1, len(timing.train_per_level) + 1))
        ax.bar([l + i * width for l in levels], timing.train_per_level, width,
               label=f"{setting} (total {timing.train_total:.3f}s)")
    ax.set_xlabel("level")
    ax.set_ylabel("train seconds")
    ax.set_title("Training time per level")
    ax.legend(fontsize=8)
    return _save(fig, path)


def save_fed_rounds(rounds, path) -> Path:
    """Global accuracy per communication round."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.round_idx for r in rounds], [r.accuracy for r in rounds], marker="o")
    ax.set_xlabel("communication round")
    ax.set_ylabel("accuracy (%)")
    ax.set_title("Federated training progress")
    ax.grid(alpha=0.3)
    return _save(fig, path)


def save_overhead_panels(report, path) -> Path:
    """Per-tier traffic rates plus the headline overhead figures."""
    doc = report.to_jsonable()
    traffic = doc["traffic"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    tiers = ["to RSU", "to near edge", "to cloud", "model updates"]
    rates = [
        traffic["to_rsu_kb_per_s"],
        traffic["to_edge_kb_per_s"],
        traffic["to_cloud_kb_per_s"],
        traffic["update_kb_per_s_aggregate"],
    ]
    ax1.bar(tiers, rates, color="#a85048")
    ax1.set_ylabel("KB/s")
    ax1.set_title("Network traffic")
    ax1.tick_params(axis="x", labelsize=8)

    labels = ["memory (KB)", "response overhead (%)"]
    values = [doc["per_vehicle_memory_kb"], doc["response_overhead_pct"]]
    ax2.bar(labels, values, color="#48a878")
    ax2.set_title("Per-vehicle cost")
    for i, v in enumerate(values):
        ax2.text(i, v, f"{v:.3g}", ha="center", va="bottom", fontsize=8)
    return _save(fig, path)
