"""Persisted pipeline records: dataset rows, predictions, manifests.

Stages communicate only through files. JSONL files open with a one-line
schema header object so readers can validate what they were handed.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import SchemaError
from .geo import GeoPoint
from .retrieval.types import GeoContext

DATASET_SCHEMA = "svllm-dataset/1"
PREDICTIONS_SCHEMA = "svllm-predictions/1"


@dataclass
class DatasetRecord:
    sample_id: str
    city: str
    point: GeoPoint
    split: str                       # train | val | test
    truths: dict[str, float]         # task key -> ground truth (unit space)
    bins: dict[str, float]           # task key -> bin label value
    context: dict                    # serialized GeoContext
    provenance: dict = field(default_factory=dict)

    def geo_context(self) -> GeoContext:
        return GeoContext.from_dict(self.context)

    def as_dict(self) -> dict:
        return {"sample_id": self.sample_id, "city": self.city,
                "point": self.point.as_dict(), "split": self.split,
                "truths": self.truths, "bins": self.bins,
                "context": self.context, "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetRecord":
        return cls(sample_id=d["sample_id"], city=d["city"],
                   point=GeoPoint.from_dict(d["point"]), split=d["split"],
                   truths=d["truths"], bins=d["bins"], context=d["context"],
                   provenance=d.get("provenance", {}))


@dataclass
class PredictionRecord:
    sample_id: str
    city: str
    task: str
    model: str
    preset: str = "Full"
    pred_bin: float | None = None
    pred_value: float | None = None     # unit-space prediction, when native
    true_bin: float | None = None
    true_value: float | None = None
    rationale_text: str = ""
    answer_text: str = ""
    prompt_hashes: list[str] = field(default_factory=list)
    template_version: str = ""
    gateway_calls: int = 0

    def as_dict(self) -> dict:
        return {"sample_id": self.sample_id, "city": self.city, "task": self.task,
                "model": self.model, "preset": self.preset, "pred_bin": self.pred_bin,
                "pred_value": self.pred_value,
                "true_bin": self.true_bin, "true_value": self.true_value,
                "rationale_text": self.rationale_text, "answer_text": self.answer_text,
                "prompt_hashes": self.prompt_hashes,
                "template_version": self.template_version,
                "gateway_calls": self.gateway_calls}

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        return cls(sample_id=d["sample_id"], city=d["city"], task=d["task"],
                   model=d["model"], preset=d.get("preset", "Full"),
                   pred_bin=d.get("pred_bin"), pred_value=d.get("pred_value"),
                   true_bin=d.get("true_bin"), true_value=d.get("true_value"),
                   rationale_text=d.get("rationale_text", ""),
                   answer_text=d.get("answer_text", ""),
                   prompt_hashes=d.get("prompt_hashes", []),
                   template_version=d.get("template_version", ""),
                   gateway_calls=d.get("gateway_calls", 0))


# --- JSONL IO -----------------------------------------------------------

def write_jsonl(path: Path, schema: str, rows: Iterable[dict], header_extra: dict | None = None) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w") as fh:
        header = {"schema": schema}
        header.update(header_extra or {})
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            count += 1
    return count


def append_jsonl(path: Path, schema: str, rows: Iterable[dict]) -> int:
    """Append rows, writing the schema header if the file is new."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists() or path.stat().st_size == 0
    count = 0
    with path.open("a") as fh:
        if fresh:
            fh.write(json.dumps({"schema": schema}, sort_keys=True) + "\n")
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            count += 1
    return count


def read_jsonl(path: Path, expect_schema: str) -> Iterator[dict]:
    path = Path(path)
    with path.open() as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise SchemaError(f"{path}: empty file")
        header = json.loads(header_line)
        if header.get("schema") != expect_schema:
            raise SchemaError(f"{path}: schema {header.get('schema')!r}, "
                              f"expected {expect_schema!r}")
        for line in fh:
            if line.strip():
                yield json.loads(line)


def load_dataset(path: Path) -> list[DatasetRecord]:
    return [DatasetRecord.from_dict(d) for d in read_jsonl(path, DATASET_SCHEMA)]


def load_predictions(path: Path) -> list[PredictionRecord]:
    return [PredictionRecord.from_dict(d) for d in read_jsonl(path, PREDICTIONS_SCHEMA)]


# --- run manifests ------------------------------------------------------

def config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_manifest(path: Path, stage: str, cfg_hash: str, seed: int,
                   counts: dict, outputs: list[str], extra: dict | None = None) -> dict:
    manifest = {
        "stage": stage,
        "config_hash": cfg_hash,
        "seed": seed,
        "counts": counts,
        "outputs": sorted(outputs),
        "created_at": _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }
    manifest.update(extra or {})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def load_manifest(path: Path) -> dict | None:
    path = Path(path)
    if not path.exists():
        return None
    return json.loads(path.read_text())


def stage_is_current(manifest_path: Path, cfg_hash: str, workdir: Path) -> bool:
    """True when the stage already ran with this config and outputs exist."""
    manifest = load_manifest(manifest_path)
    if manifest is None or manifest.get("config_hash") != cfg_hash:
        return False
    return all((Path(workdir) / rel).exists() for rel in manifest.get("outputs", []))
