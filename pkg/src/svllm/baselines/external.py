"""Ingestion of externally produced prediction files.

Deep baselines run elsewhere hand their predictions over as CSV with
columns sample_id, task, prediction; rows are validated against the
dataset before entering the evaluation store.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from ..errors import SchemaError, UnknownSampleId

REQUIRED_COLUMNS = ("sample_id", "task", "prediction")


def import_external_predictions(path: Path, known_ids: set[str],
                                known_tasks: set[str]) -> list[tuple[str, str, float]]:
    """Parse and validate an external prediction CSV.

    Returns (sample_id, task, prediction) tuples. Raises SchemaError for
    structural problems and UnknownSampleId (with the offending row
    number) for ids absent from the dataset.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file")
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        out = []
        for row_no, row in enumerate(reader, start=2):  # header is line 1
            sid = (row.get("sample_id") or "").strip()
            task = (row.get("task") or "").strip()
            raw = (row.get("prediction") or "").strip()
            if not sid or not task or not raw:
                raise SchemaError(f"{path}: row {row_no}: blank required field")
            if sid not in known_ids:
                raise UnknownSampleId(f"{path}: row {row_no}: unknown sample id {sid!r}")
            if task not in known_tasks:
                raise SchemaError(f"{path}: row {row_no}: unknown task {task!r}")
            try:
                value = float(raw)
            except ValueError:
                raise SchemaError(
                    f"{path}: row {row_no}: prediction {raw!r} is not a number") from None
            if not math.isfinite(value):
                raise SchemaError(f"{path}: row {row_no}: non-finite prediction")
            out.append((sid, task, value))
    return out
