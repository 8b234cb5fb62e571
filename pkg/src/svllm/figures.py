"""Matplotlib figure rendering for the report paths.

Figures are written next to the delimited outputs; the Agg backend keeps
everything headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluation import MetricsReport  # noqa: E402
from .reports import ablation_rows, model_comparison_rows  # noqa: E402


def save_model_comparison(report: MetricsReport, path: Path, space: str = "bin") -> Path:
    """Grouped bars of R^2 per task and model."""
    rows, models = model_comparison_rows(report, space=space)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.8 * len(rows)), 4.0))
    width = 0.8 / max(1, len(models))
    for m_idx, model in enumerate(models):
        xs = [i + m_idx * width for i in range(len(rows))]
        ys = [cells.get(model) if cells.get(model) is not None else 0.0
              for _, cells in rows]
        ax.bar(xs, ys, width=width, label=model)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(rows))])
    ax.set_xticklabels([label for label, _ in rows], rotation=20, ha="right")
    ax.set_ylabel(f"R^2 ({space} space)")
    ax.set_title("Model comparison")
    ax.legend(fontsize=8)
    ax.axhline(0.0, color="black", linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_ablation_grid(r2_by_city_per_preset: dict[str, dict], path: Path) -> Path:
    """Grouped bars of R^2 per city and ablation preset."""
    rows, presets = ablation_rows(r2_by_city_per_preset)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(rows) + 2), 4.0))
    width = 0.8 / max(1, len(presets))
    for p_idx, preset in enumerate(presets):
        xs = [i + p_idx * width for i in range(len(rows))]
        ys = [cells.get(preset) if cells.get(preset) is not None else 0.0
              for _, cells in rows]
        ax.bar(xs, ys, width=width, label=preset)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(rows))])
    ax.set_xticklabels([label for label, _ in rows])
    ax.set_ylabel("R^2 (bin space)")
    ax.set_title("Ablation comparison")
    ax.legend(fontsize=8)
    ax.axhline(0.0, color="black", linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_bias_ranking(table, path: Path) -> Path:
    """Horizontal bars of the ranked positive/negative bias correlations."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cells = list(table.positive) + list(reversed(table.negative))
    labels = [f"{c.city} | {c.task} | {c.category}" for c in cells]
    values = [c.r for c in cells]
    colors = ["seagreen" if v >= 0 else "firebrick" for v in values]
    fig, ax = plt.subplots(figsize=(8.0, max(3.0, 0.35 * len(cells) + 1.5)))
    ys = list(range(len(cells)))[::-1]
    ax.barh(ys, values, color=colors)
    ax.set_yticks(ys)
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("correlation with prediction bias")
    ax.set_title("POI composition vs prediction bias")
    ax.axvline(0.0, color="black", linewidth=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
