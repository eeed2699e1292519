"""Matplotlib figures rendered by the report pipeline."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

GROUP_LABELS = {
    "E": "Existence",
    "C": "Choice",
    "PR": "Positive Relations",
    "NR": "Negative Relations",
}


def satisfaction_figure(conformance: dict, path: str | Path) -> Path:
    """Bar chart: overall and per-group satisfaction rates of a simulation."""
    path = Path(path)
    groups = conformance.get("per_group", {})
    labels = ["overall"] + [GROUP_LABELS.get(g, g) for g in groups]
    values = [conformance["overall_rate"]] + list(groups.values())
    fig, ax = plt.subplots(figsize=(6, 3.5))
    bars = ax.bar(labels, [100 * v for v in values], color="#4878a8")
    ax.set_ylabel("traces satisfying imposed conditions (%)")
    ax.set_ylim(0, 105)
    for bar, v in zip(bars, values):
        ax.annotate(f"{100 * v:.1f}", (bar.get_x() + bar.get_width() / 2, 100 * v),
                    ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def coverage_delta_figure(rows: Sequence[dict], path: str | Path,
                          top: int = 20) -> Path:
    """Horizontal bars of per-activity case-coverage change, largest first."""
    path = Path(path)
    ordered = sorted(rows, key=lambda r: abs(r["delta"]), reverse=True)[:top]
    ordered = ordered[::-1]
    labels = [r["activity"] for r in ordered]
    deltas = [100 * r["delta"] for r in ordered]
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.3 * len(ordered) + 1)))
    colors = ["#a84848" if d < 0 else "#48a860" for d in deltas]
    ax.barh(labels, deltas, color=colors)
    ax.axvline(0, color="black", linewidth=0.8)
    ax.set_xlabel("case coverage change, simulated vs original (pp)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def constraint_rates_figure(per_constraint: Sequence[dict], path: str | Path) -> Path:
    """Per-imposed-constraint satisfaction rates."""
    path = Path(path)
    labels = [f'{r["instance"]}={r["imposed"]}' for r in per_constraint]
    rates = [100 * r["rate"] for r in per_constraint]
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.3 * len(labels) + 1)))
    ax.barh(labels, rates, color="#4878a8")
    ax.set_xlabel("traces matching imposed bit (%)")
    ax.set_xlim(0, 105)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
