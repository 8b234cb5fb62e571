"""Gradient-boosted regression trees, squared error, built from scratch.

Each round fits a depth-limited tree to the current residuals with an
exhaustive split search (candidate thresholds at midpoints of
consecutive distinct feature values, SSE objective, ties broken by
feature index then threshold). Training rows are canonicalized by
sorting before fitting, so fits are invariant to row permutation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DegenerateFeatures, NonFinite, TooFewSamples


@dataclass(frozen=True)
class GbrtConfig:
    rounds: int = 10
    max_depth: int = 3
    learning_rate: float = 0.3
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("max_depth and min_samples_leaf must be >= 1")


# Trees are nested dicts: {"value": v} leaves, {"feature": i, "threshold": t,
# "left": ..., "right": ...} internal nodes. Rows with feature <= threshold
# go left.
Tree = dict


@dataclass
class GbrtModel:
    init_value: float
    learning_rate: float
    trees: list[Tree] = field(default_factory=list)
    train_sse: list[float] = field(default_factory=list)  # after each round

    def as_dict(self) -> dict:
        return {"init_value": self.init_value, "learning_rate": self.learning_rate,
                "trees": self.trees, "train_sse": self.train_sse}

    @classmethod
    def from_dict(cls, d: dict) -> "GbrtModel":
        return cls(init_value=d["init_value"], learning_rate=d["learning_rate"],
                   trees=d["trees"], train_sse=d.get("train_sse", []))

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), sort_keys=True))

    @classmethod
    def load(cls, path: Path) -> "GbrtModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _sse(values: list[float]) -> float:
    if not values:
        return 0.0
    mean = sum(values) / len(values)
    return sum((v - mean) ** 2 for v in values)


def _best_split(rows: list[tuple[tuple[float, ...], float]], min_leaf: int):
    """Exhaustive (feature, threshold) search minimizing child SSE.

    Returns (feature, threshold, sse) or None when no split separates the
    rows. Scanning features ascending and thresholds ascending with a
    strict improvement test realizes the tie-break order.
    """
    n_features = len(rows[0][0])
    best = None
    for f in range(n_features):
        ordered = sorted(rows, key=lambda r: r[0][f])
        targets = [t for _, t in ordered]
        prefix_sum = [0.0]
        prefix_sq = [0.0]
        for t in targets:
            prefix_sum.append(prefix_sum[-1] + t)
            prefix_sq.append(prefix_sq[-1] + t * t)
        n = len(ordered)
        total_sum, total_sq = prefix_sum[n], prefix_sq[n]
        for i in range(1, n):
            lo = ordered[i - 1][0][f]
            hi = ordered[i][0][f]
            if lo == hi:
                continue
            if i < min_leaf or n - i < min_leaf:
                continue
            threshold = (lo + hi) / 2.0
            left_sse = prefix_sq[i] - prefix_sum[i] ** 2 / i
            right_sum = total_sum - prefix_sum[i]
            right_sse = (total_sq - prefix_sq[i]) - right_sum ** 2 / (n - i)
            sse = left_sse + right_sse
            if best is None or sse < best[2]:
                best = (f, threshold, sse)
    return best


def _build_tree(rows, depth: int, cfg: GbrtConfig) -> Tree:
    targets = [t for _, t in rows]
    if depth >= cfg.max_depth or len(rows) < 2 * cfg.min_samples_leaf:
        return {"value": sum(targets) / len(targets)}
    split = _best_split(rows, cfg.min_samples_leaf)
    if split is None or split[2] >= _sse(targets):
        return {"value": sum(targets) / len(targets)}
    f, threshold, _ = split
    left_rows = [r for r in rows if r[0][f] <= threshold]
    right_rows = [r for r in rows if r[0][f] > threshold]
    return {"feature": f, "threshold": threshold,
            "left": _build_tree(left_rows, depth + 1, cfg),
            "right": _build_tree(right_rows, depth + 1, cfg)}


def _tree_predict(tree: Tree, features: tuple[float, ...]) -> float:
    node = tree
    while "value" not in node:
        if features[node["feature"]] <= node["threshold"]:
            node = node["left"]
        else:
            node = node["right"]
    return node["value"]


def gbrt_fit(train: list[tuple[tuple[float, ...], float]],
             cfg: GbrtConfig = GbrtConfig()) -> GbrtModel:
    """Boost cfg.rounds trees against squared-error residuals."""
    if len(train) < 2:
        raise TooFewSamples(f"gbrt needs at least 2 samples, got {len(train)}")
    rows = [(tuple(float(x) for x in feats), float(y)) for feats, y in train]
    widths = {len(f) for f, _ in rows}
    if len(widths) != 1:
        raise ValueError(f"inconsistent feature widths: {sorted(widths)}")
    for feats, y in rows:
        if not all(math.isfinite(x) for x in feats) or not math.isfinite(y):
            raise NonFinite("non-finite training row")

    targets = [y for _, y in rows]
    constant_target = max(targets) == min(targets)
    if len({f for f, _ in rows}) == 1 and not constant_target:
        raise DegenerateFeatures("all feature rows identical but targets vary")

    # Canonical row order makes the fit independent of input permutation.
    rows.sort(key=lambda r: (r[0], r[1]))

    init = sum(y for _, y in rows) / len(rows)
    model = GbrtModel(init_value=init, learning_rate=cfg.learning_rate)
    residuals = [y - init for _, y in rows]
    prev_sse = sum(r * r for r in residuals)
    for _ in range(cfg.rounds):
        tree = _build_tree([(f, r) for (f, _), r in zip(rows, residuals)], 0, cfg)
        model.trees.append(tree)
        residuals = [r - cfg.learning_rate * _tree_predict(tree, f)
                     for (f, _), r in zip(rows, residuals)]
        sse = sum(r * r for r in residuals)
        assert sse <= prev_sse * (1.0 + 1e-12) + 1e-12, "training SSE increased"
        model.train_sse.append(sse)
        prev_sse = sse
    return model


def gbrt_predict(model: GbrtModel, features) -> float:
    feats = tuple(float(x) for x in features)
    return model.init_value + model.learning_rate * sum(
        _tree_predict(t, feats) for t in model.trees)
