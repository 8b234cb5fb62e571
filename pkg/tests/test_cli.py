import json
from pathlib import Path

import pytest

from svllm.cli import main
from svllm.dataset import load_manifest


def write_config(tmp_path: Path, **overrides) -> Path:
    cfg = {
        "city": "synthville",
        "bbox": {"min_lat": -0.05, "max_lat": 0.05, "min_lon": -0.05, "max_lon": 0.05},
        "seed": 7,
        "workdir": str(tmp_path / "run"),
        "synth": {"n_points": 120},
        "binning": {"min_values": 50},
        "model": {"provider": "mock-echo"},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def run(cmd, cfg_path, *extra):
    return main([cmd, "--config", str(cfg_path), *extra])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One fully executed offline pipeline shared by the checks below."""
    tmp_path = tmp_path_factory.mktemp("cli")
    cfg_path = write_config(tmp_path)
    for cmd in ("synth", "sample", "retrieve", "predict", "baseline",
                "evaluate", "ablate", "bias"):
        assert run(cmd, cfg_path) == 0, cmd
    return tmp_path, cfg_path


def test_pipeline_outputs_exist(pipeline):
    tmp_path, _ = pipeline
    results = tmp_path / "run" / "results"
    for name in ("report.csv", "report.json", "report.txt", "ablation.csv",
                 "ablation.txt", "ablation.json", "bias.csv", "bias_matrix.csv"):
        assert (results / name).exists(), name
    for name in ("model_comparison_bin.png", "model_comparison_unit.png",
                 "ablation.png", "bias.png"):
        fig = results / "figures" / name
        assert fig.exists() and fig.stat().st_size > 0, name


def test_oracle_closure_r2(pipeline):
    tmp_path, _ = pipeline
    report = json.loads((tmp_path / "run" / "results" / "report.json").read_text())
    echo_rows = [r for r in report if r["model"] == "mock-echo" and r["space"] == "bin"]
    assert len(echo_rows) == 5
    for row in echo_rows:
        assert abs(row["r2"] - 1.0) <= 1e-12
        assert row["mae"] == 0.0


def test_rerun_is_noop_with_zero_provider_calls(pipeline):
    tmp_path, cfg_path = pipeline
    manifest_before = load_manifest(tmp_path / "run" / "manifests" / "retrieve.json")
    assert run("retrieve", cfg_path) == 0
    manifest_after = load_manifest(tmp_path / "run" / "manifests" / "retrieve.json")
    assert manifest_after == manifest_before  # stage skipped entirely

    # Forced re-run must be served from the response cache: no transport calls.
    assert run("retrieve", cfg_path, "--force") == 0
    manifest_forced = load_manifest(tmp_path / "run" / "manifests" / "retrieve.json")
    assert manifest_forced["counts"]["transport_calls"] == 0
    assert manifest_forced["counts"]["network_calls"] == 0
    assert manifest_forced["counts"]["new_records"] == 0


def test_predict_is_resumable(pipeline):
    tmp_path, cfg_path = pipeline
    assert run("predict", cfg_path, "--force") == 0
    manifest = load_manifest(tmp_path / "run" / "manifests" / "predict.json")
    assert manifest["counts"]["predictions"] == 0
    assert manifest["counts"]["skipped_existing"] > 0
    assert manifest["counts"]["gateway_calls"] == 0


def test_ablation_emits_four_rows_per_city(pipeline):
    tmp_path, _ = pipeline
    lines = (tmp_path / "run" / "results" / "ablation.csv").read_text().splitlines()
    header, rows = lines[0], lines[1:]
    assert header == "city,preset,r2"
    cities = {row.split(",")[0] for row in rows}
    assert len(rows) == 4 * len(cities)
    presets = {row.split(",")[1] for row in rows}
    assert presets == {"Full", "WithoutCOT", "WithoutStreetview", "WithoutTEXT"}


def test_ablation_call_counts(pipeline):
    tmp_path, _ = pipeline
    manifest = load_manifest(tmp_path / "run" / "manifests" / "ablate.json")
    calls = manifest["counts"]["gateway_calls"]
    n = manifest["counts"]["samples"]
    assert calls["WithoutCOT"] == n
    for preset in ("Full", "WithoutStreetview", "WithoutTEXT"):
        assert calls[preset] == 2 * n


def test_manifest_outputs_all_exist(pipeline):
    tmp_path, _ = pipeline
    workdir = tmp_path / "run"
    for manifest_path in (workdir / "manifests").glob("*.json"):
        manifest = json.loads(manifest_path.read_text())
        for rel in manifest["outputs"]:
            assert (workdir / rel).exists(), f"{manifest_path.name}: {rel}"


def test_exit_code_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"city\": \"x\"}")  # missing bbox
    assert main(["synth", "--config", str(bad)]) == 2
    assert main(["synth", "--config", str(tmp_path / "none.json")]) == 2


def test_exit_code_data_error(tmp_path):
    cfg_path = write_config(tmp_path)
    # sample before synth: missing upstream artifact
    assert run("sample", cfg_path) == 4


def test_exit_code_provider_error(tmp_path):
    cfg_path = write_config(tmp_path)
    assert run("synth", cfg_path) == 0
    assert run("sample", cfg_path) == 0
    # wipe the fixtures so replay-mode retrieval misses
    import shutil
    shutil.rmtree(tmp_path / "run" / "cache" / "fixtures")
    assert run("retrieve", cfg_path) == 3


def test_upstream_changes_invalidate_downstream_stage(tmp_path):
    cfg_path = write_config(tmp_path)
    assert run("synth", cfg_path) == 0
    assert run("sample", cfg_path) == 0
    n_before = len(json.loads((tmp_path / "run" / "splits.json").read_text())["train"])
    # regenerate a larger city; sample must notice the new points file
    cfg_path = write_config(tmp_path, synth={"n_points": 160})
    assert run("synth", cfg_path) == 0
    assert run("sample", cfg_path) == 0  # no --force needed
    n_after = len(json.loads((tmp_path / "run" / "splits.json").read_text())["train"])
    assert (n_before, n_after) == (72, 96)


def test_seed_override_changes_split(tmp_path):
    cfg_path = write_config(tmp_path)
    assert run("synth", cfg_path) == 0
    assert run("sample", cfg_path) == 0
    splits_a = json.loads((tmp_path / "run" / "splits.json").read_text())
    assert main(["sample", "--config", str(cfg_path), "--seed", "99", "--force"]) == 0
    splits_b = json.loads((tmp_path / "run" / "splits.json").read_text())
    assert splits_a["test"] != splits_b["test"]


def test_unit_space_baselines(tmp_path):
    cfg_path = write_config(tmp_path, baseline_space="unit",
                            synth={"n_points": 100}, binning={"min_values": 40})
    for cmd in ("synth", "sample", "retrieve", "baseline", "evaluate"):
        assert run(cmd, cfg_path) == 0, cmd
    report = json.loads((tmp_path / "run" / "results" / "report.json").read_text())
    unit_rows = [r for r in report if r["space"] == "unit" and r["model"] == "knn"]
    assert unit_rows and all(r["n"] > 0 for r in unit_rows)


def test_missing_images_dropped_with_exclusion_log(tmp_path):
    cfg_path = write_config(tmp_path, synth={"n_points": 150, "image_availability": 0.6})
    for cmd in ("synth", "sample", "retrieve"):
        assert run(cmd, cfg_path) == 0
    workdir = tmp_path / "run"
    exclusions = [json.loads(l) for l
                  in (workdir / "exclusions.jsonl").read_text().splitlines()]
    assert exclusions and all(e["reason"] == "missing_image" for e in exclusions)
    dataset_ids = {json.loads(l)["sample_id"] for l
                   in (workdir / "dataset.jsonl").read_text().splitlines()[1:]}
    assert not dataset_ids & {e["sample_id"] for e in exclusions}
    assert len(dataset_ids) + len(exclusions) == 150


def test_missing_images_kept_with_flag(tmp_path):
    cfg_path = write_config(
        tmp_path,
        synth={"n_points": 150, "image_availability": 0.6},
        retrieval={"keep_missing_images": True})
    for cmd in ("synth", "sample", "retrieve", "predict", "evaluate"):
        assert run(cmd, cfg_path) == 0
    workdir = tmp_path / "run"
    records = [json.loads(l) for l
               in (workdir / "dataset.jsonl").read_text().splitlines()[1:]]
    assert len(records) == 150
    statuses = {r["context"]["image"]["status"] for r in records}
    assert statuses == {"available", "missing"}
    # text-only samples still predict and score
    report = json.loads((workdir / "results" / "report.json").read_text())
    echo = [r for r in report if r["model"] == "mock-echo" and r["space"] == "bin"]
    assert all(abs(r["r2"] - 1.0) <= 1e-12 for r in echo)


def test_external_baseline_ingestion(tmp_path):
    cfg_path = write_config(tmp_path)
    for cmd in ("synth", "sample", "retrieve"):
        assert run(cmd, cfg_path) == 0
    dataset_ids = []
    for line in (tmp_path / "run" / "dataset.jsonl").read_text().splitlines()[1:]:
        rec = json.loads(line)
        if rec["split"] == "test":
            dataset_ids.append(rec["sample_id"])
    ext = tmp_path / "external.csv"
    ext.write_text("sample_id,task,prediction\n" +
                   "\n".join(f"{sid},population,5.0" for sid in dataset_ids[:5]) + "\n")
    assert run("baseline", cfg_path, "--external", str(ext), "--as", "mlp-bert") == 0
    rows = [json.loads(l) for l in
            (tmp_path / "run" / "baselines.jsonl").read_text().splitlines()[1:]]
    assert any(r["model"] == "mlp-bert" for r in rows)
    # external model shows up in the evaluation report
    assert run("evaluate", cfg_path) == 0
    report = json.loads((tmp_path / "run" / "results" / "report.json").read_text())
    assert any(r["model"] == "mlp-bert" for r in report)
