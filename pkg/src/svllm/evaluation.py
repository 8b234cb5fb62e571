"""Regression metrics, per-group scoring, and the ablation runner.

mae/rmse/r_squared operate on paired value sequences. evaluate_run
groups prediction records by (city, task, model) and scores each group
twice: in bin space and, inverted through the fitted scale, in
ground-truth units. run_ablations replays the prediction pipeline under
each named preset and grids R^2 per city.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .binning import BinScale, from_bin, nearest_label
from .errors import EmptyInput, LengthMismatch, MissingScale, NonFinite, ZeroVariance

logger = logging.getLogger(__name__)


def _validate(y_true, y_pred) -> tuple[list[float], list[float]]:
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"lengths differ: {len(y_true)} vs {len(y_pred)}")
    if len(y_true) == 0:
        raise EmptyInput("metrics need at least one observation")
    yt = [float(v) for v in y_true]
    yp = [float(v) for v in y_pred]
    for v in yt + yp:
        if not math.isfinite(v):
            raise NonFinite(f"non-finite metric input {v!r}")
    return yt, yp


def mae(y_true, y_pred) -> float:
    """Mean absolute error."""
    yt, yp = _validate(y_true, y_pred)
    return sum(abs(t - p) for t, p in zip(yt, yp)) / len(yt)


def rmse(y_true, y_pred) -> float:
    """Root mean squared error."""
    yt, yp = _validate(y_true, y_pred)
    return math.sqrt(sum((t - p) ** 2 for t, p in zip(yt, yp)) / len(yt))


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination; may be negative.

    Raises ZeroVariance when the truth has no variance (undefined).
    """
    yt, yp = _validate(y_true, y_pred)
    y_bar = sum(yt) / len(yt)
    ss_tot = sum((t - y_bar) ** 2 for t in yt)
    if ss_tot == 0.0:
        raise ZeroVariance("all ground-truth values identical; R^2 undefined")
    ss_res = sum((t - p) ** 2 for t, p in zip(yt, yp))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class MetricsRow:
    city: str
    task: str
    model: str
    space: str          # "bin" | "unit"
    mae: float
    rmse: float
    r2: float | None    # None when truth variance is zero in this group
    n: int


@dataclass
class MetricsReport:
    rows: list[MetricsRow] = field(default_factory=list)

    def filter(self, **kw) -> list[MetricsRow]:
        out = self.rows
        for key, val in kw.items():
            out = [r for r in out if getattr(r, key) == val]
        return out

    def as_dicts(self) -> list[dict]:
        return [{"city": r.city, "task": r.task, "model": r.model, "space": r.space,
                 "mae": r.mae, "rmse": r.rmse, "r2": r.r2, "n": r.n}
                for r in self.rows]


def _score_group(city, task, model, space, y_true, y_pred) -> MetricsRow:
    m = mae(y_true, y_pred)
    r = rmse(y_true, y_pred)
    # Jensen guarantees mae <= rmse; the epsilon absorbs summation-order noise.
    assert m <= r * (1.0 + 1e-12) + 1e-15, f"MAE {m} exceeds RMSE {r}"
    try:
        r2 = r_squared(y_true, y_pred)
    except ZeroVariance:
        logger.warning("zero truth variance for %s/%s/%s in %s space; omitting R^2",
                       city, task, model, space)
        r2 = None
    return MetricsRow(city, task, model, space, m, r, r2, len(y_true))


def evaluate_run(predictions, scales: dict[str, BinScale],
                 spaces: tuple[str, ...] = ("bin", "unit")) -> MetricsReport:
    """Score prediction records grouped by (city, task, model).

    Each record needs city, task, model, true_bin, pred_bin and, for
    unit-space rows, true_value. Groups without data are skipped with a
    warning; a missing scale for a requested unit-space group raises
    MissingScale.
    """
    groups: dict[tuple[str, str, str], list] = {}
    for rec in predictions:
        groups.setdefault((rec.city, rec.task, rec.model), []).append(rec)

    report = MetricsReport()
    for (city, task, model), recs in sorted(groups.items()):
        recs = [r for r in recs if r.pred_bin is not None and r.true_bin is not None]
        if not recs:
            logger.warning("no usable predictions for %s/%s/%s; group omitted",
                           city, task, model)
            continue
        if "bin" in spaces:
            report.rows.append(_score_group(
                city, task, model, "bin",
                [r.true_bin for r in recs], [r.pred_bin for r in recs]))
        if "unit" in spaces:
            scale = scales.get(task)
            if scale is None:
                raise MissingScale(f"no fitted scale for task {task!r}")
            y_true = [r.true_value for r in recs]
            if any(v is None for v in y_true):
                logger.warning("missing ground-truth units for %s/%s/%s; "
                               "unit-space row omitted", city, task, model)
                continue
            # Unit-space predictions invert through the scale unless the
            # model produced ground-truth units natively.
            y_pred = [r.pred_value if r.pred_value is not None
                      else from_bin(scale, nearest_label(r.pred_bin)) for r in recs]
            report.rows.append(_score_group(city, task, model, "unit", y_true, y_pred))
    return report


# --- ablation runs -------------------------------------------------------

@dataclass
class AblationRun:
    preset: str
    flags: object                         # AblationFlags
    r2_by_city: dict = field(default_factory=dict)
    gateway_calls: int = 0
    n_samples: int = 0
    error: str | None = None
    predictions: list = field(default_factory=list)


def run_ablations(records, task, scale: BinScale, model_cfg,
                  presets: dict | None = None, answer_images: bool = True,
                  image_root=None, transcript_dir=None,
                  parallel: bool = False) -> list[AblationRun]:
    """Run the prediction pipeline once per ablation preset.

    records are dataset rows carrying contexts and truths (typically the
    test split). Failures are isolated per preset so the remaining
    presets still complete; R^2 is computed in bin space per city.
    Presets run sequentially unless parallel is set (predictable provider
    load by default).
    """
    from concurrent.futures import ThreadPoolExecutor
    from pathlib import Path

    from .gateway import Gateway, predict_sample
    from .prompts import PRESETS

    if presets is None:
        presets = PRESETS

    def one_preset(item) -> AblationRun:
        preset_name, flags = item
        transcript = (Path(transcript_dir) / f"{preset_name}.jsonl"
                      if transcript_dir else None)
        gateway = Gateway(model_cfg, image_root=image_root, transcript_path=transcript)
        run = AblationRun(preset=preset_name, flags=flags)
        try:
            for rec in records:
                pred = predict_sample(rec.geo_context(), task, scale, flags, gateway,
                                      answer_images=answer_images)
                pred.city = rec.city
                pred.preset = preset_name
                pred.true_bin = rec.bins[task.key]
                pred.true_value = rec.truths.get(task.key)
                run.predictions.append(pred)
        except Exception as e:
            run.error = f"{type(e).__name__}: {e}"
            logger.warning("preset %s failed: %s", preset_name, run.error)
            return run
        run.gateway_calls = gateway.calls
        run.n_samples = len(run.predictions)
        by_city: dict[str, list] = {}
        for p in run.predictions:
            by_city.setdefault(p.city, []).append(p)
        for city, preds in sorted(by_city.items()):
            try:
                run.r2_by_city[city] = r_squared([p.true_bin for p in preds],
                                                 [p.pred_bin for p in preds])
            except ZeroVariance:
                run.r2_by_city[city] = None
        return run

    items = list(presets.items())
    if parallel and len(items) > 1:
        with ThreadPoolExecutor(max_workers=len(items)) as pool:
            return list(pool.map(one_preset, items))
    return [one_preset(item) for item in items]
