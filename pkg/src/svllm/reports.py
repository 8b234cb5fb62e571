"""Report rendering: aligned text tables, CSV, and JSON.

Three table shapes are produced: a task x model single-metric comparison,
a city x preset ablation grid, and a per-task city x (model metrics)
matrix. All numeric cells render at 4 decimal places.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .evaluation import MetricsReport
from .tasks import TASKS


def fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.4f}"


def _task_label(key: str) -> str:
    return TASKS[key].display_name if key in TASKS else key


def render_matrix(row_header: str, rows: list[tuple[str, dict]],
                  columns: list[str], title: str = "") -> str:
    """Aligned text table. rows = [(label, {column: value-or-str})]."""
    header = [row_header] + columns
    body = []
    for label, cells in rows:
        line = [label]
        for col in columns:
            v = cells.get(col)
            line.append(v if isinstance(v, str) else fmt(v))
        body.append(line)
    widths = [max(len(str(r[i])) for r in [header] + body) for i in range(len(header))]
    out = []
    if title:
        out.append(title)
    out.append("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    out.append("  ".join("-" * w for w in widths))
    for line in body:
        out.append("  ".join(str(c).ljust(w) for c, w in zip(line, widths)))
    return "\n".join(out) + "\n"


def write_matrix_csv(path: Path, row_header: str, rows: list[tuple[str, dict]],
                     columns: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([row_header] + columns)
        for label, cells in rows:
            writer.writerow([label] + [
                cells[c] if isinstance(cells.get(c), str) else fmt(cells.get(c))
                for c in columns])


# --- shapes over a MetricsReport ----------------------------------------

def model_comparison_rows(report: MetricsReport, space: str = "bin",
                          metric: str = "r2", city: str | None = None
                          ) -> tuple[list[tuple[str, dict]], list[str]]:
    """Task rows x model columns for one metric (the headline comparison)."""
    rows_at = [r for r in report.rows if r.space == space
               and (city is None or r.city == city)]
    models = sorted({r.model for r in rows_at})
    tasks = sorted({r.task for r in rows_at},
                   key=lambda t: list(TASKS).index(t) if t in TASKS else 99)
    rows = []
    for task in tasks:
        cells = {}
        for model in models:
            match = [r for r in rows_at if r.task == task and r.model == model]
            if match:
                cells[model] = getattr(match[0], metric)
        rows.append((_task_label(task), cells))
    return rows, models


def city_task_rows(report: MetricsReport, task: str, space: str = "bin"
                   ) -> tuple[list[tuple[str, dict]], list[str]]:
    """City rows x (model MAE/RMSE/R2) columns for one task."""
    rows_at = [r for r in report.rows if r.space == space and r.task == task]
    models = sorted({r.model for r in rows_at})
    columns = []
    for model in models:
        columns += [f"{model} MAE", f"{model} RMSE", f"{model} R2"]
    cities = sorted({r.city for r in rows_at})
    rows = []
    for city in cities:
        cells = {}
        for model in models:
            match = [r for r in rows_at if r.city == city and r.model == model]
            if match:
                cells[f"{model} MAE"] = match[0].mae
                cells[f"{model} RMSE"] = match[0].rmse
                cells[f"{model} R2"] = match[0].r2
        rows.append((city, cells))
    return rows, columns


def ablation_rows(r2_by_city_per_preset: dict[str, dict],
                  presets: list[str] | None = None
                  ) -> tuple[list[tuple[str, dict]], list[str]]:
    """City rows x preset columns of R^2 values."""
    if presets is None:
        presets = list(r2_by_city_per_preset)
    cities = sorted({c for grid in r2_by_city_per_preset.values() for c in grid})
    rows = [(city, {p: r2_by_city_per_preset.get(p, {}).get(city) for p in presets})
            for city in cities]
    return rows, presets


# --- top-level writers ---------------------------------------------------

def write_metrics_report(report: MetricsReport, out_dir: Path,
                         stem: str = "report") -> list[Path]:
    """Write the flat CSV, JSON, and shaped text views of a report."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out_dir / f"{stem}.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["city", "task", "model", "space", "mae", "rmse", "r2", "n"])
        for r in report.rows:
            writer.writerow([r.city, r.task, r.model, r.space,
                             fmt(r.mae), fmt(r.rmse), fmt(r.r2), r.n])
    written.append(csv_path)

    json_path = out_dir / f"{stem}.json"
    json_path.write_text(json.dumps(report.as_dicts(), indent=2, sort_keys=True))
    written.append(json_path)

    text_parts = []
    for space in sorted({r.space for r in report.rows}):
        rows, models = model_comparison_rows(report, space=space)
        text_parts.append(render_matrix(
            "Task", rows, models,
            title=f"Model comparison (R^2, {space} space)"))
        for task in sorted({r.task for r in report.rows if r.space == space}):
            trows, tcols = city_task_rows(report, task, space=space)
            if len(trows) > 0:
                text_parts.append(render_matrix(
                    "City", trows, tcols,
                    title=f"{_task_label(task)} ({space} space)"))
    text_path = out_dir / f"{stem}.txt"
    text_path.write_text("\n".join(text_parts))
    written.append(text_path)
    return written


def write_bias_tables(table, out_dir: Path) -> list[Path]:
    """Ranked correlation CSV plus the full matrix CSV for external plotting."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ranked = out_dir / "bias.csv"
    with ranked.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Section", "City", "Metric", "POI Column",
                         "Correlation with Difference"])
        for cell in table.positive:
            writer.writerow(["positive", cell.city, _task_label(cell.task),
                             cell.category, fmt(cell.r)])
        for cell in table.negative:
            writer.writerow(["negative", cell.city, _task_label(cell.task),
                             cell.category, fmt(cell.r)])
    matrix = out_dir / "bias_matrix.csv"
    with matrix.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["City", "Metric", "POI Column", "Correlation with Difference"])
        for cell in sorted(table.all_cells, key=lambda c: (c.city, c.task, c.category)):
            writer.writerow([cell.city, _task_label(cell.task), cell.category, fmt(cell.r)])
    notes = out_dir / "bias_notes.txt"
    notes.write_text("".join(f"skipped {line}\n" for line in table.skipped))
    return [ranked, matrix, notes]
