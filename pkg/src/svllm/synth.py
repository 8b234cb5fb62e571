"""Synthetic city generation for fully offline end-to-end runs.

The generator materializes three things from one seed: sample points
with per-task ground truths, a POI world, and replay fixtures for every
provider request the retrieval clients will issue against those points
(addresses, nearby places, street-view metadata/images, POI queries).
Outputs are byte-identical for a fixed spec.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidSpec
from .geo import BBox, GeoPoint, haversine_distance
from .retrieval.clients import (nearby_places_request, poi_request, probe_points,
                                reverse_geocode_request, svi_image_request,
                                svi_metadata_request)
from .retrieval.transport import FixtureStore
from .retrieval.types import RetrievalConfig
from .tasks import DEFAULT_TASK_KEYS

TRUTH_KINDS = ("gaussian_bump", "linear_gradient", "checkerboard")

POINTS_SCHEMA = "svllm-points/1"

_POI_TAGS = {
    "Residential": ("Residence", {"building": "residential"}),
    "Commercial and Business Facilities": ("Shop", {"shop": "convenience"}),
    "Industrial": ("Works", {"landuse": "industrial"}),
    "Administration and Public Services": ("Town Hall", {"amenity": "townhall"}),
    "Science and Education": ("School", {"amenity": "school"}),
    "Green Space": ("Park", {"leisure": "park"}),
    "Other": ("Viewpoint", {"tourism": "viewpoint"}),
}

DEFAULT_POI_INTENSITY = {
    "Residential": 60,
    "Commercial and Business Facilities": 50,
    "Industrial": 20,
    "Administration and Public Services": 15,
    "Science and Education": 15,
    "Green Space": 30,
    "Other": 20,
}

# (base, peak) per task in its ground-truth unit.
_TASK_LEVELS = {
    "population": (50.0, 20_000.0),
    "health": (3.0, 55.0),
    "ndvi": (0.05, 0.75),
    "building_height": (3.0, 80.0),
    "impervious_surface": (5.0, 90.0),
}

_STREETS = ("Meridian", "Harbor", "Summit", "Cedar", "Granite", "Willow",
            "Lantern", "Quarry", "Foundry", "Orchard")
_DISTRICTS = ("North Quarter", "Old Town", "Riverside", "Hillcrest", "Dockside")


@dataclass
class SynthCitySpec:
    bbox: BBox
    name: str = "synthville"
    n_points: int = 500
    tasks: tuple[str, ...] = DEFAULT_TASK_KEYS
    truth: dict = field(default_factory=dict)      # task -> {"kind": ..., params}
    poi_intensity: dict = field(default_factory=lambda: dict(DEFAULT_POI_INTENSITY))
    image_availability: float = 1.0
    point_layout: str = "uniform"                  # uniform | grid
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 100:
            raise InvalidSpec(f"n_points must be >= 100, got {self.n_points}")
        if not 0.0 <= self.image_availability <= 1.0:
            raise InvalidSpec("image_availability must be in [0, 1]")
        if self.point_layout not in ("uniform", "grid"):
            raise InvalidSpec(f"unknown point layout {self.point_layout!r}")
        for task, cfg in self.truth.items():
            kind = cfg.get("kind", "gaussian_bump")
            if kind not in TRUTH_KINDS:
                raise InvalidSpec(f"unknown truth function {kind!r} for {task}")


def _bbox_center(bbox: BBox) -> tuple[float, float]:
    return ((bbox.min_lat + bbox.max_lat) / 2.0, (bbox.min_lon + bbox.max_lon) / 2.0)


def _bbox_diag_m(bbox: BBox) -> float:
    return haversine_distance(GeoPoint(bbox.min_lat, bbox.min_lon, "a"),
                              GeoPoint(bbox.max_lat, bbox.max_lon, "b"))


def truth_value(spec: SynthCitySpec, task: str, task_index: int,
                point: GeoPoint) -> float:
    """Deterministic ground truth for one point and task."""
    cfg = dict(spec.truth.get(task, {}))
    kind = cfg.get("kind", "gaussian_bump")
    base, peak = _TASK_LEVELS.get(task, (0.0, 100.0))
    base = cfg.get("base", base)
    peak = cfg.get("peak", peak)
    bbox = spec.bbox
    lat_span = max(bbox.max_lat - bbox.min_lat, 1e-9)
    lon_span = max(bbox.max_lon - bbox.min_lon, 1e-9)

    if kind == "gaussian_bump":
        c_lat, c_lon = _bbox_center(bbox)
        # Offset each task's bump so tasks are not perfectly correlated.
        c_lat += cfg.get("center_dlat", (task_index - 2) * 0.08 * lat_span)
        c_lon += cfg.get("center_dlon", (2 - task_index) * 0.08 * lon_span)
        sigma = cfg.get("sigma_m", 0.25 * _bbox_diag_m(bbox))
        d = haversine_distance(point, GeoPoint(c_lat, c_lon, "center"))
        value = base + peak * math.exp(-(d * d) / (2.0 * sigma * sigma))
    elif kind == "linear_gradient":
        u = (point.lat - bbox.min_lat) / lat_span
        v = (point.lon - bbox.min_lon) / lon_span
        w_lat = cfg.get("weight_lat", 0.7)
        value = base + peak * (w_lat * u + (1.0 - w_lat) * v)
    else:  # checkerboard
        cells = int(cfg.get("cells", 4))
        i = min(int((point.lat - bbox.min_lat) / lat_span * cells), cells - 1)
        j = min(int((point.lon - bbox.min_lon) / lon_span * cells), cells - 1)
        value = base + (peak if (i + j) % 2 == 0 else 0.0)

    noise_frac = cfg.get("noise_frac", 0.01)
    if noise_frac:
        rng = random.Random(f"{spec.seed}:{task}:{point.id}:noise")
        value += noise_frac * peak * rng.gauss(0.0, 1.0)
    return value


def generate_points(spec: SynthCitySpec) -> list[GeoPoint]:
    bbox = spec.bbox
    points = []
    if spec.point_layout == "grid":
        side = math.ceil(math.sqrt(spec.n_points))
        k = 0
        for i in range(side):
            for j in range(side):
                if k >= spec.n_points:
                    break
                lat = bbox.min_lat + (bbox.max_lat - bbox.min_lat) * (i + 0.5) / side
                lon = bbox.min_lon + (bbox.max_lon - bbox.min_lon) * (j + 0.5) / side
                points.append(GeoPoint(lat, lon, f"{spec.name}-{k:05d}"))
                k += 1
    else:
        rng = random.Random(f"{spec.seed}:points")
        for k in range(spec.n_points):
            lat = rng.uniform(bbox.min_lat, bbox.max_lat)
            lon = rng.uniform(bbox.min_lon, bbox.max_lon)
            points.append(GeoPoint(lat, lon, f"{spec.name}-{k:05d}"))
    return points


def generate_pois(spec: SynthCitySpec) -> list[dict]:
    """Overpass-style node dicts forming the city's POI world."""
    bbox = spec.bbox
    nodes = []
    node_id = 1
    for category in sorted(spec.poi_intensity):
        count = int(spec.poi_intensity[category])
        prefix, tags = _POI_TAGS.get(category, ("Place", {"tourism": "viewpoint"}))
        rng = random.Random(f"{spec.seed}:poi:{category}")
        for i in range(count):
            lat = rng.uniform(bbox.min_lat, bbox.max_lat)
            lon = rng.uniform(bbox.min_lon, bbox.max_lon)
            node_tags = dict(tags)
            node_tags["name"] = f"{prefix} {i + 1}"
            nodes.append({"type": "node", "id": node_id,
                          "lat": round(lat, 7), "lon": round(lon, 7),
                          "tags": node_tags})
            node_id += 1
    return nodes


def _synthetic_address(spec: SynthCitySpec, point: GeoPoint) -> dict:
    rng = random.Random(f"{spec.seed}:{point.id}:addr")
    house = rng.randint(1, 240)
    street = rng.choice(_STREETS)
    district = rng.choice(_DISTRICTS)
    postcode = f"{rng.randint(10000, 99999)}"
    display = f"{house} {street} Street, {district}, {spec.name.title()}, {postcode}"
    return {
        "display_name": display,
        "address": {"house_number": str(house), "road": f"{street} Street",
                    "suburb": district, "city": spec.name.title(),
                    "postcode": postcode, "country": "Synthland"},
    }


def _placeholder_jpeg(spec: SynthCitySpec, point: GeoPoint) -> bytes:
    rng = random.Random(f"{spec.seed}:{point.id}:img")
    body = bytes(rng.getrandbits(8) for _ in range(256))
    return b"\xff\xd8\xff\xe0" + body + b"\xff\xd9"


def write_fixtures(spec: SynthCitySpec, points: list[GeoPoint],
                   pois: list[dict], retrieval_cfg: RetrievalConfig) -> int:
    """Materialize replay fixtures for every client request over points."""
    store = FixtureStore(Path(retrieval_cfg.cache_dir) / "fixtures")
    count = 0
    nearby_n = retrieval_cfg.places_limit * retrieval_cfg.places_oversample
    for point in points:
        store.store_json(reverse_geocode_request(point, retrieval_cfg),
                         _synthetic_address(spec, point))
        count += 1

        ranked = sorted(pois, key=lambda el: (
            haversine_distance(point, GeoPoint(el["lat"], el["lon"], "")),
            el["id"]))
        near = [el for el in ranked
                if haversine_distance(point, GeoPoint(el["lat"], el["lon"], ""))
                <= retrieval_cfg.places_radius_m][:nearby_n]
        store.store_json(nearby_places_request(point, retrieval_cfg),
                         {"elements": near})
        count += 1

        in_poi_radius = [el for el in ranked
                         if haversine_distance(point, GeoPoint(el["lat"], el["lon"], ""))
                         <= retrieval_cfg.poi_radius_m][:retrieval_cfg.poi_limit]
        store.store_json(poi_request(point, retrieval_cfg), {"elements": in_poi_radius})
        count += 1

        available = (random.Random(f"{spec.seed}:{point.id}:svi").random()
                     < spec.image_availability)
        if available:
            store.store_json(svi_metadata_request(point, retrieval_cfg),
                             {"status": "OK",
                              "location": {"lat": point.lat, "lng": point.lon}})
            store.store_bytes(svi_image_request(point, retrieval_cfg),
                              _placeholder_jpeg(spec, point))
            count += 2
        else:
            store.store_json(svi_metadata_request(point, retrieval_cfg),
                             {"status": "ZERO_RESULTS"})
            count += 1
            for probe in probe_points(point, retrieval_cfg):
                store.store_json(svi_metadata_request(probe, retrieval_cfg),
                                 {"status": "ZERO_RESULTS"})
                count += 1
    return count


def generate_city(spec: SynthCitySpec, retrieval_cfg: RetrievalConfig
                  ) -> tuple[list[GeoPoint], dict, list[dict], int]:
    """Generate points, truths, the POI world, and all replay fixtures.

    Returns (points, truths by sample id, poi nodes, fixture count).
    """
    points = generate_points(spec)
    truths = {
        p.id: {task: truth_value(spec, task, idx, p)
               for idx, task in enumerate(spec.tasks)}
        for p in points
    }
    pois = generate_pois(spec)
    n_fixtures = write_fixtures(spec, points, pois, retrieval_cfg)
    return points, truths, pois, n_fixtures
