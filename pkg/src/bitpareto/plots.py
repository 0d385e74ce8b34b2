"""Figure rendering for run outputs.

Renders the delimited/JSON artifacts of a run into static PNG files:
the score-versus-bits trade-off front, the per-layer sensitivity profile
with its outlier threshold, per-target bit-allocation maps, and archive
convergence.  Figures are derived views; the data files stay the source
of truth.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")  # file rendering only; never needs a display

import matplotlib.pyplot as plt
import numpy as np


def plot_front(
    front: Sequence[dict], out_path: str | Path, title: str = "quality vs. memory"
) -> Path:
    """Step plot of the Pareto front: score (lower better) against bits."""
    out_path = Path(out_path)
    bits = [e["eff_bits"] for e in front]
    scores = [e["score"] for e in front]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(bits, scores, where="post", color="tab:blue", lw=1.2)
    ax.plot(bits, scores, "o", color="tab:blue", ms=4)
    ax.set_xlabel("effective bits per weight")
    ax.set_ylabel("quality score (lower is better)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_sensitivity(
    scores: Sequence[float],
    names: Sequence[str],
    median: float,
    multiplier: float,
    out_path: str | Path,
) -> Path:
    """Bar chart of per-layer sensitivity with the outlier threshold line."""
    out_path = Path(out_path)
    n = len(scores)
    threshold = multiplier * median
    colors = ["tab:red" if s > threshold else "tab:gray" for s in scores]
    fig, ax = plt.subplots(figsize=(max(6, n * 0.12), 4))
    ax.bar(range(n), scores, color=colors)
    ax.axhline(median, color="k", ls=":", lw=1, label="median")
    ax.axhline(threshold, color="tab:red", ls="--", lw=1, label=f"{multiplier}x median")
    if n <= 40:
        ax.set_xticks(range(n))
        ax.set_xticklabels(names, rotation=90, fontsize=7)
    else:
        ax.set_xlabel("layer index")
    ax.set_ylabel("sensitivity score")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_allocation(
    rows: Sequence[dict], out_path: str | Path, title: str = "bit allocation"
) -> Path:
    """Heatmap of assigned bits, one row per module kind, one column per block.

    rows are allocation records {"layer", "module", "bits"}; the block index
    is the order of appearance within each module.
    """
    out_path = Path(out_path)
    modules: list[str] = []
    for r in rows:
        if r["module"] not in modules:
            modules.append(r["module"])
    width = max(sum(1 for r in rows if r["module"] == m) for m in modules)
    grid = np.full((len(modules), width), np.nan)
    seen = {m: 0 for m in modules}
    for r in rows:
        m = r["module"]
        grid[modules.index(m), seen[m]] = r["bits"]
        seen[m] += 1

    fig, ax = plt.subplots(figsize=(max(6, width * 0.25), 0.5 * len(modules) + 1.5))
    all_bits = sorted({int(r["bits"]) for r in rows})
    vmin, vmax = min(all_bits), max(all_bits)
    im = ax.imshow(grid, aspect="auto", cmap="viridis", vmin=vmin, vmax=vmax)
    ax.set_yticks(range(len(modules)))
    ax.set_yticklabels(modules)
    ax.set_xlabel("block")
    ax.set_title(title)
    cbar = fig.colorbar(im, ax=ax, ticks=all_bits)
    cbar.set_label("bits")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_convergence(archive_rows: Sequence[dict], out_path: str | Path) -> Path:
    """Best archived score per iteration, showing the verified-search progress."""
    out_path = Path(out_path)
    by_iter: dict[int, float] = {}
    for rec in archive_rows:
        it = int(rec["iter"])
        s = float(rec["score"])
        by_iter[it] = min(s, by_iter.get(it, np.inf))
    iters = sorted(by_iter)
    best = np.minimum.accumulate([by_iter[i] for i in iters])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iters, best, color="tab:green")
    ax.set_xlabel("iteration")
    ax.set_ylabel("best verified score")
    ax.set_title("search convergence")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
