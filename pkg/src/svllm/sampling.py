"""Deterministic spatial sampling order and dataset splitting.

The traversal is a greedy farthest-point ordering: it starts from a pair
of points at maximum separation and repeatedly appends the point whose
minimum distance to everything already selected is largest. Ties always
break toward the lexicographically smallest id so the order is
reproducible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import DuplicateId, EmptyInput, InvalidFractions
from .geo import GeoPoint, haversine_distance


@dataclass(frozen=True)
class SplitConfig:
    train_frac: float = 0.6
    val_frac: float = 0.1
    test_frac: float = 0.3
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0 for f in fracs):
            raise InvalidFractions(f"negative fraction in {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise InvalidFractions(f"fractions {fracs} sum to {sum(fracs)!r}, not 1.0")


@dataclass(frozen=True)
class SampleOrder:
    ids: tuple[str, ...]
    # min_distances[i] is the selected point's distance to the nearest
    # previously selected point; inf for the very first point.
    min_distances: tuple[float, ...]


def farthest_first_order(points: list[GeoPoint]) -> SampleOrder:
    """Order points farthest-to-nearest by greedy max-min distance.

    The first two entries are a pair attaining the maximum pairwise
    distance (smaller id first); every later entry maximizes its minimum
    distance to all points selected before it.
    """
    if not points:
        raise EmptyInput("farthest_first_order needs at least one point")
    ids = [p.id for p in points]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DuplicateId(f"duplicate sample ids: {dupes}")

    if len(points) == 1:
        return SampleOrder((points[0].id,), (math.inf,))

    by_id = {p.id: p for p in points}

    # Seed pair: global max pairwise distance, ties by sorted id pair.
    best_d = -1.0
    best_pair: tuple[str, str] | None = None
    ordered = sorted(points, key=lambda p: p.id)
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            d = haversine_distance(ordered[i], ordered[j])
            if d > best_d:
                best_d = d
                best_pair = (ordered[i].id, ordered[j].id)
    assert best_pair is not None
    first, second = best_pair

    selected = [first, second]
    min_dist = [math.inf, best_d]
    # Running min-distance to the selected set for every candidate.
    remaining: dict[str, float] = {}
    for p in points:
        if p.id in (first, second):
            continue
        remaining[p.id] = min(haversine_distance(p, by_id[first]),
                              haversine_distance(p, by_id[second]))

    while remaining:
        # Max-min candidate; ties toward smallest id.
        pick = None
        pick_d = -1.0
        for pid in sorted(remaining):
            d = remaining[pid]
            if d > pick_d:
                pick_d = d
                pick = pid
        assert pick is not None
        selected.append(pick)
        min_dist.append(pick_d)
        del remaining[pick]
        chosen_point = by_id[pick]
        for pid in remaining:
            d = haversine_distance(by_id[pid], chosen_point)
            if d < remaining[pid]:
                remaining[pid] = d

    return SampleOrder(tuple(selected), tuple(min_dist))


def apportion(n: int, fractions: list[float]) -> list[int]:
    """Largest-remainder apportionment of n items across fractions.

    Remainder ties break toward the earlier fraction.
    """
    quotas = [n * f for f in fractions]
    sizes = [int(math.floor(q)) for q in quotas]
    shortfall = n - sum(sizes)
    order = sorted(range(len(fractions)),
                   key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:shortfall]:
        sizes[i] += 1
    return sizes


def split_dataset(ids: list[str], cfg: SplitConfig) -> tuple[list[str], list[str], list[str]]:
    """Partition ids into (train, val, test) by seeded shuffle + slicing."""
    if not ids:
        raise EmptyInput("split_dataset needs at least one id")
    n_train, n_val, n_test = apportion(
        len(ids), [cfg.train_frac, cfg.val_frac, cfg.test_frac])
    shuffled = list(ids)
    random.Random(cfg.seed).shuffle(shuffled)
    train = shuffled[:n_train]
    val = shuffled[n_train:n_train + n_val]
    test = shuffled[n_train + n_val:]
    assert len(test) == n_test
    return train, val, test
