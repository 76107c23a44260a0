"""Figures written next to the CLI's JSON/TSV outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "xtick.labelsize": 7,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.bbox": "tight",
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    # no timestamp metadata so reruns give identical files
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_mining_stats(stats: Mapping, out_dir: str | Path) -> list[Path]:
    """Accepted pairs per pattern and rejection counts per reason."""
    out_dir = Path(out_dir)
    written = []
    with plt.rc_context(STYLE):
        per_pattern = sorted(stats.get("per_pattern", {}).items(), key=lambda kv: (-kv[1], kv[0]))
        fig, ax = plt.subplots(figsize=(max(4.0, 0.3 * len(per_pattern) + 1), 3))
        if per_pattern:
            names, counts = zip(*per_pattern)
            ax.bar(range(len(names)), counts, color="#4c72b0")
            ax.set_xticks(range(len(names)))
            ax.set_xticklabels(names, rotation=70, ha="right")
        ax.set_ylabel("accepted pairs")
        ax.set_title(f"EPC {stats.get('EPC', 0)} / CPE {stats.get('CPE', 0)}")
        written.append(_save(fig, out_dir / "mining_patterns.png"))

        rejects = dict(stats.get("rejects", {}))
        rejects["duplicate"] = stats.get("duplicates", 0)
        fig, ax = plt.subplots(figsize=(4, 2.6))
        ax.bar(list(rejects), list(rejects.values()), color="#c44e52")
        ax.set_ylabel("sentences")
        ax.set_title("rejections")
        written.append(_save(fig, out_dir / "mining_rejects.png"))
    return written


def plot_edge_frequencies(freqs: Sequence[int], out_dir: str | Path) -> Path:
    """Histogram of edge weights on log axes."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 3))
        if freqs:
            ax.hist(freqs, bins=min(50, max(5, len(set(freqs)))), color="#55a868", log=True)
            if max(freqs) > 10 * max(1, min(freqs)):
                ax.set_xscale("log")
        ax.set_xlabel("edge frequency")
        ax.set_ylabel("edges")
        return _save(fig, Path(out_dir) / "graph_edge_frequencies.png")


def plot_eval(metrics: Mapping[str, float], div_scores: Sequence[float],
              out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    with plt.rc_context(STYLE):
        scalar = {k: v for k, v in metrics.items() if isinstance(v, (int, float))}
        if scalar:
            fig, axes = plt.subplots(1, len(scalar), figsize=(2.2 * len(scalar), 2.6), squeeze=False)
            for ax, (name, value) in zip(axes[0], sorted(scalar.items())):
                ax.bar([name], [value], color="#8172b2")
                ax.set_title(f"{value:.4g}")
            written.append(_save(fig, out_dir / "eval_metrics.png"))
        if div_scores:
            fig, ax = plt.subplots(figsize=(4, 3))
            ax.hist(div_scores, bins=20, range=(0, 1), color="#dd8452")
            ax.set_xlabel("Div (clipped unigram precision)")
            ax.set_ylabel("inputs")
            written.append(_save(fig, out_dir / "eval_div.png"))
    return written
