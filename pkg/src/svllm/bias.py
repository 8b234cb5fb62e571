"""Prediction-bias analysis against nearby POI composition.

For each prediction point, tagged OSM nodes within a fixed radius
(default 500 m) are counted per functional category; signed bias
(predicted minus actual, in bin units) is then correlated with each
category's counts per (city, task). The statistic is the signed Pearson
r, not r squared: over- and under-prediction directions matter, so
negative correlations must stay visible in the ranked table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import LengthMismatch, ZeroVariance
from .geo import GeoPoint
from .retrieval.clients import Retriever


class PoiCategory(str, Enum):
    RESIDENTIAL = "Residential"
    COMMERCIAL_AND_BUSINESS = "Commercial and Business Facilities"
    INDUSTRIAL = "Industrial"
    ADMIN_AND_PUBLIC_SERVICES = "Administration and Public Services"
    SCIENCE_AND_EDUCATION = "Science and Education"
    GREEN_SPACE = "Green Space"
    OTHER = "Other"
    TOTAL = "Total"


COUNTED_CATEGORIES = tuple(c for c in PoiCategory if c is not PoiCategory.TOTAL)


def load_category_mapping(path: Path | None = None) -> dict[str, dict]:
    """Category -> {tag: values} mapping; ships as an editable data file."""
    if path is not None:
        raw = json.loads(Path(path).read_text())
    else:
        raw = json.loads(resources.files("svllm.data")
                         .joinpath("poi_categories.json").read_text())
    raw.pop("_comment", None)
    return raw


def categorize_tags(tags: dict, mapping: dict[str, dict]) -> PoiCategory:
    for cat_name, rules in mapping.items():
        for tag_key, accepted in rules.items():
            if tag_key not in tags:
                continue
            if accepted == "*" or tags[tag_key] in accepted:
                return PoiCategory(cat_name)
    return PoiCategory.OTHER


def poi_counts(retriever: Retriever, point: GeoPoint,
               mapping: dict[str, dict] | None = None) -> dict[PoiCategory, int]:
    """Count POIs per category within the retriever's poi radius.

    Total always equals the sum over the other categories.
    """
    mapping = mapping if mapping is not None else load_category_mapping()
    counts = {cat: 0 for cat in PoiCategory}
    for el in retriever.poi_elements(point):
        tags = el.get("tags") or {}
        if not tags:
            continue
        counts[categorize_tags(tags, mapping)] += 1
    counts[PoiCategory.TOTAL] = sum(counts[c] for c in COUNTED_CATEGORIES)
    return counts


def pearson_r(x: list[float], y: list[float]) -> float:
    """Pearson product-moment correlation in [-1, 1]."""
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    n = len(x)
    if n < 2:
        raise LengthMismatch("pearson_r needs at least 2 pairs")
    xs = [float(v) for v in x]
    ys = [float(v) for v in y]
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((v - mx) ** 2 for v in xs)
    syy = sum((v - my) ** 2 for v in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("pearson_r undefined for a constant sequence")
    sxy = sum((a - mx) * (b - my) for a, b in zip(xs, ys))
    r = sxy / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class BiasRecord:
    sample_id: str
    city: str
    task: str
    bias: float                          # predicted - actual, bin units
    poi_counts: dict

    def __post_init__(self):
        if not -9.9 <= self.bias <= 9.9:
            raise ValueError(f"bias {self.bias} outside [-9.9, 9.9]")


@dataclass(frozen=True)
class BiasCell:
    city: str
    task: str
    category: str
    r: float


@dataclass
class BiasTable:
    positive: list[BiasCell] = field(default_factory=list)  # descending r
    negative: list[BiasCell] = field(default_factory=list)  # ascending r
    skipped: list[str] = field(default_factory=list)        # zero-variance notes
    all_cells: list[BiasCell] = field(default_factory=list)


def rank_bias_cells(cells: list[BiasCell], top_n: int = 10,
                    skipped: list[str] | None = None) -> BiasTable:
    """Rank correlation cells into top positive / top negative sections.

    r ties rank by (city, task, category) lexicographically.
    """
    table = BiasTable(all_cells=list(cells), skipped=list(skipped or []))
    positive = [c for c in cells if c.r > 0]
    negative = [c for c in cells if c.r < 0]
    positive.sort(key=lambda c: (-c.r, c.city, c.task, c.category))
    negative.sort(key=lambda c: (c.r, c.city, c.task, c.category))
    table.positive = positive[:top_n]
    table.negative = negative[:top_n]
    return table


def bias_correlation_table(records: list[BiasRecord], top_n: int = 10) -> BiasTable:
    """Correlate category counts with bias per (city, task); rank extremes.

    Zero-variance cells are skipped with a note.
    """
    groups: dict[tuple[str, str], list[BiasRecord]] = {}
    for rec in records:
        groups.setdefault((rec.city, rec.task), []).append(rec)

    cells: list[BiasCell] = []
    skipped: list[str] = []
    for (city, task), recs in sorted(groups.items()):
        biases = [r.bias for r in recs]
        for cat in COUNTED_CATEGORIES + (PoiCategory.TOTAL,):
            counts = [float(r.poi_counts.get(cat, r.poi_counts.get(cat.value, 0)))
                      for r in recs]
            try:
                r_val = pearson_r(counts, biases)
            except (ZeroVariance, LengthMismatch) as e:
                skipped.append(f"{city}/{task}/{cat.value}: {e}")
                continue
            cells.append(BiasCell(city, task, cat.value, r_val))
    return rank_bias_cells(cells, top_n=top_n, skipped=skipped)
