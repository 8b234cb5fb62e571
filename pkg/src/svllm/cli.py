"""svllm command line: synth, sample, retrieve, predict, baseline,
evaluate, ablate, bias.

Each stage consumes the previous stage's files inside the configured
workdir, writes versioned outputs plus a manifest (config hash, seed,
counts), and is a no-op when re-run with an unchanged config. Exit
codes: 0 success, 2 config error, 3 provider error, 4 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .baselines import gbrt_fit, gbrt_predict, import_external_predictions, knn_predict
from .binning import fit_bin_scale, load_scales, save_scales, to_bin
from .config import PipelineConfig, Workspace, load_config, stage_config_payload
from .dataset import (DATASET_SCHEMA, PREDICTIONS_SCHEMA, DatasetRecord,
                      PredictionRecord, append_jsonl, config_hash, load_dataset,
                      load_predictions, read_jsonl, stage_is_current, write_jsonl,
                      write_manifest)
from .errors import ConfigError, DataError, EmptyInput, ProviderFailure
from .evaluation import evaluate_run, run_ablations
from .gateway import Gateway, predict_sample
from .geo import GeoPoint
from .prompts import PRESETS, TEMPLATE_VERSION, resolve_preset
from .reports import ablation_rows, render_matrix, write_bias_tables, write_metrics_report
from .retrieval.clients import Retriever
from .retrieval.types import ImageStatus
from .sampling import farthest_first_order, split_dataset
from .synth import DEFAULT_POI_INTENSITY, SynthCitySpec, generate_city
from .tasks import get_task

logger = logging.getLogger(__name__)

POINTS_SCHEMA = "svllm-points/1"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="svllm",
        description="Geospatial indicator prediction pipeline (offline-verifiable).")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="path to the JSON config")
        sp.add_argument("--seed", type=int, default=None, help="override the global seed")
        sp.add_argument("--mode", choices=["live", "replay", "record"], default=None,
                        help="retrieval transport mode")
        sp.add_argument("--preset", default=None,
                        help="ablation preset: full | no-cot | no-svi | no-text")
        sp.add_argument("--force", action="store_true",
                        help="re-run even if the stage manifest is current")

    common(sub.add_parser("synth", help="generate a synthetic city + replay fixtures"))
    common(sub.add_parser("sample", help="order points, split the dataset, fit scales"))
    common(sub.add_parser("retrieve", help="assemble geographic context per point"))

    sp = sub.add_parser("predict", help="run the staged model over a split")
    common(sp)
    sp.add_argument("--split", choices=["train", "val", "test", "all"], default="test")

    sp = sub.add_parser("baseline", help="train/evaluate shallow baselines")
    common(sp)
    sp.add_argument("--external", default=None, help="external prediction CSV to ingest")
    sp.add_argument("--as", dest="external_name", default=None,
                    help="model name for the external predictions")

    common(sub.add_parser("evaluate", help="score predictions and render reports"))

    sp = sub.add_parser("ablate", help="run all ablation presets on one task")
    common(sp)
    sp.add_argument("--task", default=None, help="indicator task for the ablation grid")

    common(sub.add_parser("bias", help="correlate POI composition with prediction bias"))
    return parser


# --- helpers -------------------------------------------------------------

def _load_points(ws: Workspace) -> list[GeoPoint]:
    if not ws.points.exists():
        raise DataError(f"missing {ws.points}; run `svllm synth` (or provide points) first")
    return [GeoPoint(d["lat"], d["lon"], d["sample_id"])
            for d in read_jsonl(ws.points, POINTS_SCHEMA)]


def _load_truths(ws: Workspace) -> dict:
    if not ws.truths.exists():
        raise DataError(f"missing {ws.truths}; run `svllm synth` first")
    payload = json.loads(ws.truths.read_text())
    return payload["truths"]


def _load_splits(ws: Workspace) -> dict:
    if not ws.splits.exists():
        raise DataError(f"missing {ws.splits}; run `svllm sample` first")
    return json.loads(ws.splits.read_text())


def _require_dataset(ws: Workspace) -> list[DatasetRecord]:
    if not ws.dataset.exists():
        raise DataError(f"missing {ws.dataset}; run `svllm retrieve` first")
    return load_dataset(ws.dataset)


def _require_scales(cfg: PipelineConfig, ws: Workspace) -> dict:
    path = cfg.scales_path or ws.scales
    if not Path(path).exists():
        raise DataError(f"missing {path}; run `svllm sample` first")
    return load_scales(path)


def _inject_truth_bins(cfg: PipelineConfig, records: list[DatasetRecord]) -> None:
    if cfg.model.provider in ("mock-echo", "mock-noisy") and cfg.model.truth_bins is None:
        cfg.model.truth_bins = {rec.sample_id: rec.bins for rec in records}


def _file_fingerprint(path: Path) -> str:
    import hashlib
    path = Path(path)
    if not path.exists():
        return "missing"
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _skip_if_current(stage: str, cfg: PipelineConfig, ws: Workspace, args,
                     extra: dict | None = None,
                     inputs: list[Path] | None = None) -> tuple[str, bool]:
    """Stage hash covers its config subset plus upstream file contents, so
    both config edits and regenerated inputs invalidate the manifest."""
    payload = stage_config_payload(cfg, stage)
    payload.update(extra or {})
    payload["inputs"] = {str(p.name): _file_fingerprint(p) for p in (inputs or [])}
    h = config_hash(payload)
    current = not args.force and stage_is_current(ws.manifest(stage), h, ws.root)
    if current:
        print(f"{stage}: up to date (config hash {h[:12]}), skipping")
    return h, current


# --- stages --------------------------------------------------------------

def cmd_synth(cfg: PipelineConfig, ws: Workspace, args) -> int:
    h, current = _skip_if_current("synth", cfg, ws, args)
    if current:
        return 0
    synth_kwargs = dict(cfg.synth)
    spec = SynthCitySpec(
        bbox=cfg.bbox, name=cfg.city, tasks=cfg.tasks,
        n_points=int(synth_kwargs.get("n_points", 500)),
        truth=synth_kwargs.get("truth", {}),
        poi_intensity=synth_kwargs.get("poi_intensity", dict(DEFAULT_POI_INTENSITY)),
        image_availability=float(synth_kwargs.get("image_availability", 1.0)),
        point_layout=synth_kwargs.get("point_layout", "uniform"),
        seed=int(synth_kwargs.get("seed", cfg.seed)))
    points, truths, pois, n_fixtures = generate_city(spec, cfg.retrieval)

    n_points = write_jsonl(ws.points, POINTS_SCHEMA,
                           ({"sample_id": p.id, "lat": p.lat, "lon": p.lon}
                            for p in points),
                           header_extra={"city": cfg.city})
    ws.truths.write_text(json.dumps(
        {"schema": "svllm-truths/1", "city": cfg.city, "truths": truths},
        sort_keys=True))

    write_manifest(ws.manifest("synth"), "synth", h, spec.seed,
                   counts={"points": n_points, "pois": len(pois),
                           "fixtures": n_fixtures},
                   outputs=[ws.rel(ws.points), ws.rel(ws.truths)])
    print(f"synth: {n_points} points, {len(pois)} POIs, {n_fixtures} fixtures")
    return 0


def cmd_sample(cfg: PipelineConfig, ws: Workspace, args) -> int:
    h, current = _skip_if_current("sample", cfg, ws, args,
                                  inputs=[ws.points, ws.truths])
    if current:
        return 0
    points = _load_points(ws)
    truths = _load_truths(ws)

    order = farthest_first_order(points)
    train, val, test = split_dataset(list(order.ids), cfg.split)

    ws.order.write_text(json.dumps({
        "schema": "svllm-order/1",
        "ids": list(order.ids),
        "min_distance_m": [None if math.isinf(d) else d for d in order.min_distances],
    }, sort_keys=True))
    ws.splits.write_text(json.dumps({
        "schema": "svllm-splits/1", "train": train, "val": val, "test": test,
    }, sort_keys=True))

    if cfg.scales_path is not None:
        scales = load_scales(cfg.scales_path)
        missing = [t for t in cfg.tasks if t not in scales]
        if missing:
            raise DataError(f"scales file {cfg.scales_path} lacks tasks {missing}")
    else:
        train_set = set(train)
        scales = {}
        for task in cfg.tasks:
            fit_values = [truths[sid][task] for sid in order.ids if sid in train_set]
            scales[task] = fit_bin_scale(fit_values, task, min_values=cfg.min_bin_values)
    save_scales(scales, ws.scales)

    write_manifest(ws.manifest("sample"), "sample", h, cfg.split.seed,
                   counts={"points": len(points), "train": len(train),
                           "val": len(val), "test": len(test)},
                   outputs=[ws.rel(ws.order), ws.rel(ws.splits), ws.rel(ws.scales)])
    print(f"sample: ordered {len(points)} points; split "
          f"{len(train)}/{len(val)}/{len(test)}")
    return 0


def cmd_retrieve(cfg: PipelineConfig, ws: Workspace, args) -> int:
    h, current = _skip_if_current("retrieve", cfg, ws, args,
                                  inputs=[ws.points, ws.truths, ws.splits, ws.scales])
    if current:
        return 0
    points = _load_points(ws)
    truths = _load_truths(ws)
    splits = _load_splits(ws)
    scales = _require_scales(cfg, ws)
    split_of = {sid: name for name in ("train", "val", "test")
                for sid in splits[name]}

    done: set[str] = set()
    if ws.dataset.exists():
        done = {d["sample_id"] for d in read_jsonl(ws.dataset, DATASET_SCHEMA)}
    if ws.exclusions.exists():
        done |= {json.loads(line)["sample_id"]
                 for line in ws.exclusions.read_text().splitlines() if line.strip()}

    retriever = Retriever(cfg.retrieval)
    pending = [p for p in sorted(points, key=lambda p: p.id) if p.id not in done]
    kept = 0
    excluded = 0
    rows = []
    for point in pending:
        ctx = retriever.build_geo_context(point)
        if ctx.image.status is ImageStatus.MISSING and not cfg.retrieval.keep_missing_images:
            with ws.exclusions.open("a") as fh:
                fh.write(json.dumps({"sample_id": point.id,
                                     "reason": "missing_image"}) + "\n")
            logger.info("excluding %s: no street view imagery in buffer", point.id)
            excluded += 1
            continue
        record = DatasetRecord(
            sample_id=point.id, city=cfg.city, point=point,
            split=split_of[point.id],
            truths=dict(truths[point.id]),
            bins={t: to_bin(scales[t], truths[point.id][t]).value for t in cfg.tasks},
            context=ctx.as_dict(),
            provenance={"address_provider": ctx.address.provider,
                        "retrieved_at": ctx.address.retrieved_at,
                        "mode": cfg.retrieval.mode.value,
                        "template_version": TEMPLATE_VERSION})
        rows.append(record.as_dict())
        kept += 1
    append_jsonl(ws.dataset, DATASET_SCHEMA, rows)

    outputs = [ws.rel(ws.dataset)]
    if ws.exclusions.exists():
        outputs.append(ws.rel(ws.exclusions))
    write_manifest(ws.manifest("retrieve"), "retrieve", h, cfg.seed,
                   counts={"new_records": kept, "excluded": excluded,
                           "already_done": len(done),
                           "transport_calls": retriever.transport.calls,
                           "network_calls": retriever.transport.network_calls},
                   outputs=outputs)
    print(f"retrieve: {kept} new contexts, {excluded} excluded, "
          f"{retriever.transport.calls} transport calls "
          f"({retriever.transport.network_calls} network)")
    return 0


def cmd_predict(cfg: PipelineConfig, ws: Workspace, args) -> int:
    preset_name, flags = resolve_preset(args.preset or "full")
    split = getattr(args, "split", "test")
    h, current = _skip_if_current("predict", cfg, ws, args,
                                  extra={"preset": preset_name, "split": split},
                                  inputs=[ws.dataset, ws.scales])
    if current:
        return 0
    records = _require_dataset(ws)
    if split != "all":
        records = [r for r in records if r.split == split]
    if not records:
        raise EmptyInput(f"no dataset records in split {split!r}")
    scales = _require_scales(cfg, ws)
    _inject_truth_bins(cfg, records)

    existing: set[tuple] = set()
    if ws.predictions.exists():
        existing = {(p.sample_id, p.task, p.model, p.preset)
                    for p in load_predictions(ws.predictions)}

    transcript_path = ws.transcripts_dir / f"predict-{preset_name}.jsonl"
    gateway = Gateway(cfg.model, image_root=cfg.retrieval.cache_dir,
                      transcript_path=transcript_path)
    task_objs = cfg.task_objects()
    rows = []
    skipped = 0
    for rec in records:
        ctx = rec.geo_context()
        for task in task_objs:
            key = (rec.sample_id, task.key, cfg.model.model_name, preset_name)
            if key in existing:
                skipped += 1
                continue
            pred = predict_sample(ctx, task, scales[task.key], flags, gateway,
                                  answer_images=cfg.answer_stage_images)
            pred.city = rec.city
            pred.preset = preset_name
            pred.true_bin = rec.bins[task.key]
            pred.true_value = rec.truths.get(task.key)
            rows.append(pred.as_dict())
    append_jsonl(ws.predictions, PREDICTIONS_SCHEMA, rows)

    outputs = [ws.rel(ws.predictions)]
    if transcript_path.exists():
        outputs.append(ws.rel(transcript_path))
    write_manifest(ws.manifest("predict"), "predict", h, cfg.model.seed,
                   counts={"predictions": len(rows), "skipped_existing": skipped,
                           "gateway_calls": gateway.calls},
                   outputs=outputs,
                   extra={"preset": preset_name, "split": split,
                          "model": cfg.model.model_name})
    print(f"predict[{preset_name}]: {len(rows)} predictions "
          f"({skipped} already present), {gateway.calls} gateway calls")
    return 0


def cmd_baseline(cfg: PipelineConfig, ws: Workspace, args) -> int:
    external = getattr(args, "external", None)
    h, current = _skip_if_current("baseline", cfg, ws, args,
                                  extra={"external": external or ""},
                                  inputs=[ws.dataset, ws.scales])
    if current:
        return 0
    records = _require_dataset(ws)
    scales = _require_scales(cfg, ws)
    train = [r for r in records if r.split == "train"]
    test = [r for r in records if r.split == "test"]
    if not train or not test:
        raise EmptyInput("baseline needs non-empty train and test splits")

    unit_space = cfg.baseline_space == "unit"

    def target_of(rec: DatasetRecord, task: str) -> float:
        return rec.truths[task] if unit_space else rec.bins[task]

    def to_row(rec: DatasetRecord, task: str, model: str, value: float) -> dict:
        if unit_space:
            pred_bin = to_bin(scales[task], value).value
            pred_value = value
        else:
            pred_bin = value
            pred_value = None
        return PredictionRecord(
            sample_id=rec.sample_id, city=rec.city, task=task, model=model,
            preset="Full", pred_bin=pred_bin, pred_value=pred_value,
            true_bin=rec.bins[task], true_value=rec.truths.get(task)).as_dict()

    ws.models_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for task in cfg.tasks:
        knn_train = [(r.point, target_of(r, task)) for r in train]
        for rec in test:
            rows.append(to_row(rec, task, "knn",
                               knn_predict(knn_train, rec.point, cfg.knn)))
        gbrt_train = [((r.point.lat, r.point.lon), target_of(r, task)) for r in train]
        model = gbrt_fit(gbrt_train, cfg.gbrt)
        model.save(ws.models_dir / f"gbrt_{task}.json")
        for rec in test:
            rows.append(to_row(rec, task, "gbrt",
                               gbrt_predict(model, (rec.point.lat, rec.point.lon))))

    n_external = 0
    if external:
        name = getattr(args, "external_name", None)
        if not name:
            raise ConfigError("--external requires --as <model name>")
        by_id = {r.sample_id: r for r in records}
        imported = import_external_predictions(
            Path(external), set(by_id), set(cfg.tasks))
        for sid, task, value in imported:
            rows.append(to_row(by_id[sid], task, name, value))
            n_external += 1

    n = write_jsonl(ws.baselines, PREDICTIONS_SCHEMA, rows)
    model_files = sorted(ws.models_dir.glob("gbrt_*.json"))
    write_manifest(ws.manifest("baseline"), "baseline", h, cfg.seed,
                   counts={"rows": n, "external_rows": n_external},
                   outputs=[ws.rel(ws.baselines)] + [ws.rel(p) for p in model_files])
    print(f"baseline: {n} rows ({n_external} external) over {len(test)} test samples")
    return 0


def cmd_evaluate(cfg: PipelineConfig, ws: Workspace, args) -> int:
    preset_name, _ = resolve_preset(args.preset or "full")
    h, current = _skip_if_current("evaluate", cfg, ws, args,
                                  extra={"preset": preset_name},
                                  inputs=[ws.predictions, ws.baselines, ws.scales])
    if current:
        return 0
    if not ws.predictions.exists() and not ws.baselines.exists():
        raise DataError("nothing to evaluate; run `svllm predict` and/or "
                        "`svllm baseline` first")
    predictions = []
    if ws.predictions.exists():
        predictions += load_predictions(ws.predictions)
    if ws.baselines.exists():
        predictions += load_predictions(ws.baselines)
    predictions = [p for p in predictions if p.preset == preset_name]
    if not predictions:
        raise DataError(f"no predictions for preset {preset_name!r}")
    scales = _require_scales(cfg, ws)

    report = evaluate_run(predictions, scales)
    written = write_metrics_report(report, ws.results_dir, stem="report")

    from .figures import save_model_comparison
    figures = []
    for space in sorted({r.space for r in report.rows}):
        figures.append(save_model_comparison(
            report, ws.figures_dir / f"model_comparison_{space}.png", space=space))

    write_manifest(ws.manifest("evaluate"), "evaluate", h, cfg.seed,
                   counts={"rows": len(report.rows), "predictions": len(predictions)},
                   outputs=[ws.rel(p) for p in written + figures],
                   extra={"preset": preset_name})
    print(f"evaluate: {len(report.rows)} report rows -> {ws.results_dir}")
    return 0


def cmd_ablate(cfg: PipelineConfig, ws: Workspace, args) -> int:
    task_key = getattr(args, "task", None) or cfg.ablation_task
    task = get_task(task_key)
    h, current = _skip_if_current("ablate", cfg, ws, args, extra={"task": task_key},
                                  inputs=[ws.dataset, ws.scales])
    if current:
        return 0
    records = [r for r in _require_dataset(ws) if r.split == "test"]
    if not records:
        raise EmptyInput("no test records for ablation")
    scales = _require_scales(cfg, ws)
    _inject_truth_bins(cfg, records)

    runs = run_ablations(records, task, scales[task_key], cfg.model,
                         answer_images=cfg.answer_stage_images,
                         image_root=cfg.retrieval.cache_dir,
                         transcript_dir=ws.transcripts_dir / "ablate")

    grid = {run.preset: run.r2_by_city for run in runs}
    ws.results_dir.mkdir(parents=True, exist_ok=True)
    csv_path = ws.results_dir / "ablation.csv"
    with csv_path.open("w", newline="") as fh:
        import csv as _csv
        writer = _csv.writer(fh)
        writer.writerow(["city", "preset", "r2"])
        for run in runs:
            for city in sorted(run.r2_by_city):
                r2 = run.r2_by_city[city]
                writer.writerow([city, run.preset,
                                 "" if r2 is None else f"{r2:.4f}"])
    rows, presets = ablation_rows(grid, presets=list(PRESETS))
    text_path = ws.results_dir / "ablation.txt"
    text_path.write_text(render_matrix(
        "City", rows, presets,
        title=f"Ablation grid (R^2, bin space) - task: {task.display_name}"))
    json_path = ws.results_dir / "ablation.json"
    json_path.write_text(json.dumps([
        {"preset": run.preset, "r2_by_city": run.r2_by_city,
         "gateway_calls": run.gateway_calls, "n_samples": run.n_samples,
         "error": run.error}
        for run in runs], indent=2, sort_keys=True))

    from .figures import save_ablation_grid
    fig_path = save_ablation_grid(grid, ws.figures_dir / "ablation.png")

    outputs = [ws.rel(p) for p in (csv_path, text_path, json_path, fig_path)]
    outputs += [ws.rel(p) for p in sorted((ws.transcripts_dir / "ablate").glob("*.jsonl"))]
    write_manifest(ws.manifest("ablate"), "ablate", h, cfg.model.seed,
                   counts={"presets": len(runs), "samples": len(records),
                           "gateway_calls": {r.preset: r.gateway_calls for r in runs}},
                   outputs=outputs,
                   extra={"task": task_key})
    failures = [r.preset for r in runs if r.error]
    print(f"ablate[{task_key}]: {len(runs)} presets over {len(records)} samples"
          + (f"; failed: {failures}" if failures else ""))
    return 0


def cmd_bias(cfg: PipelineConfig, ws: Workspace, args) -> int:
    preset_name, _ = resolve_preset(args.preset or "full")
    h, current = _skip_if_current("bias", cfg, ws, args, extra={"preset": preset_name},
                                  inputs=[ws.predictions, ws.dataset])
    if current:
        return 0
    from .bias import BiasRecord, bias_correlation_table, poi_counts

    if not ws.predictions.exists():
        raise DataError("bias analysis needs predictions; run `svllm predict` first")
    predictions = [p for p in load_predictions(ws.predictions)
                   if p.preset == preset_name and p.model == cfg.model.model_name]
    if not predictions:
        raise DataError(f"no predictions for model {cfg.model.model_name!r} "
                        f"preset {preset_name!r}")
    records = {r.sample_id: r for r in _require_dataset(ws)}

    retriever = Retriever(cfg.retrieval)
    counts_by_sample: dict[str, dict] = {}
    bias_records = []
    for pred in predictions:
        rec = records.get(pred.sample_id)
        if rec is None or pred.pred_bin is None or pred.true_bin is None:
            continue
        if pred.sample_id not in counts_by_sample:
            counts_by_sample[pred.sample_id] = poi_counts(retriever, rec.point)
        bias_records.append(BiasRecord(
            sample_id=pred.sample_id, city=pred.city, task=pred.task,
            bias=pred.pred_bin - pred.true_bin,
            poi_counts=counts_by_sample[pred.sample_id]))

    table = bias_correlation_table(bias_records)
    written = write_bias_tables(table, ws.results_dir)
    from .figures import save_bias_ranking
    fig_path = save_bias_ranking(table, ws.figures_dir / "bias.png")

    write_manifest(ws.manifest("bias"), "bias", h, cfg.seed,
                   counts={"bias_records": len(bias_records),
                           "cells": len(table.all_cells),
                           "skipped": len(table.skipped),
                           "transport_calls": retriever.transport.calls,
                           "network_calls": retriever.transport.network_calls},
                   outputs=[ws.rel(p) for p in written + [fig_path]],
                   extra={"preset": preset_name})
    print(f"bias: {len(bias_records)} records, {len(table.all_cells)} cells, "
          f"{len(table.skipped)} skipped")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "sample": cmd_sample,
    "retrieve": cmd_retrieve,
    "predict": cmd_predict,
    "baseline": cmd_baseline,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "bias": cmd_bias,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(Path(args.config), seed=args.seed, mode=args.mode)
        ws = Workspace(cfg.workdir)
        ws.root.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, ws, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ProviderFailure, TimeoutError) as e:
        print(f"provider error: {e}", file=sys.stderr)
        return 3
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 4


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
