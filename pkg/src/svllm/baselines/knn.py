"""k-nearest-neighbour regression over raw coordinates.

Neighbourhood is defined by great-circle distance; distance ties break
toward the smaller sample id so predictions are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import EmptyTraining, KTooLarge
from ..geo import GeoPoint, haversine_distance


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")


def knn_predict(train: list[tuple[GeoPoint, float]], query: GeoPoint,
                cfg: KnnConfig = KnnConfig()) -> float:
    """Mean target of the cfg.k training points nearest to query."""
    if not train:
        raise EmptyTraining("knn needs a non-empty training set")
    if cfg.k > len(train):
        raise KTooLarge(f"k={cfg.k} exceeds training size {len(train)}")
    ranked = sorted(
        ((haversine_distance(point, query), point.id, target) for point, target in train),
        key=lambda item: (item[0], item[1]))
    top = ranked[:cfg.k]
    return sum(t for _, _, t in top) / cfg.k
