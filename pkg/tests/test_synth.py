import hashlib
import json
from pathlib import Path

import pytest

from svllm.errors import InvalidSpec
from svllm.geo import GeoPoint, haversine_distance
from svllm.retrieval import Mode, RetrievalConfig, Retriever
from svllm.synth import SynthCitySpec, generate_city, generate_points, truth_value


def make_spec(bbox, **kw):
    kw.setdefault("n_points", 120)
    kw.setdefault("seed", 9)
    return SynthCitySpec(bbox=bbox, **kw)


def tree_digest(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def test_spec_validation(bbox):
    with pytest.raises(InvalidSpec):
        make_spec(bbox, n_points=50)
    with pytest.raises(InvalidSpec):
        make_spec(bbox, image_availability=1.5)
    with pytest.raises(InvalidSpec):
        make_spec(bbox, truth={"population": {"kind": "volcano"}})


def test_generation_deterministic(bbox, tmp_path):
    digests = []
    for run in ("a", "b"):
        cfg = RetrievalConfig(cache_dir=tmp_path / run, mode=Mode.REPLAY, rate_limits={})
        spec = make_spec(bbox)
        points, truths, pois, n_fix = generate_city(spec, cfg)
        blob = json.dumps({"points": [p.as_dict() for p in points],
                           "truths": truths,
                           "pois": pois}, sort_keys=True)
        digests.append((hashlib.sha256(blob.encode()).hexdigest(),
                        tree_digest(tmp_path / run)))
    assert digests[0] == digests[1]


def test_bump_center_exceeds_corner(bbox):
    spec = make_spec(bbox, truth={"population": {"kind": "gaussian_bump",
                                                 "center_dlat": 0.0, "center_dlon": 0.0,
                                                 "noise_frac": 0.0}})
    center = GeoPoint((bbox.min_lat + bbox.max_lat) / 2,
                      (bbox.min_lon + bbox.max_lon) / 2, "center")
    corner = GeoPoint(bbox.min_lat, bbox.min_lon, "corner")
    assert truth_value(spec, "population", 0, center) > truth_value(spec, "population", 0, corner)


def test_truth_function_kinds(bbox):
    spec = make_spec(bbox, truth={
        "population": {"kind": "linear_gradient", "noise_frac": 0.0},
        "health": {"kind": "checkerboard", "noise_frac": 0.0},
    })
    lo = GeoPoint(bbox.min_lat, bbox.min_lon, "lo")
    hi = GeoPoint(bbox.max_lat, bbox.max_lon, "hi")
    assert truth_value(spec, "population", 0, lo) < truth_value(spec, "population", 0, hi)
    values = {round(truth_value(spec, "health", 1, p), 6)
              for p in generate_points(make_spec(bbox, n_points=150))}
    assert len(values) == 2  # two-level checkerboard


def test_grid_layout(bbox):
    points = generate_points(make_spec(bbox, n_points=100, point_layout="grid"))
    assert len(points) == 100
    lats = sorted({p.lat for p in points})
    assert len(lats) == 10  # 10x10 grid


def test_fixtures_satisfy_retrieval_invariants(bbox, tmp_path):
    cfg = RetrievalConfig(cache_dir=tmp_path / "cache", mode=Mode.REPLAY, rate_limits={})
    spec = make_spec(bbox)
    points, truths, pois, _ = generate_city(spec, cfg)
    retriever = Retriever(cfg)
    for point in points[:25]:
        ctx = retriever.build_geo_context(point)
        assert ctx.address.display_name
        assert len(ctx.nearby) <= 10
        dists = [p.distance_m for p in ctx.nearby]
        assert dists == sorted(dists)
        for place in ctx.nearby:
            assert place.distance_m <= cfg.places_radius_m
            assert place.distance_m == pytest.approx(
                haversine_distance(point, place.location), abs=1e-9)
        assert ctx.image.available
        assert ctx.image.offset_m == 0.0
    assert retriever.transport.network_calls == 0


def test_partial_image_availability(bbox, tmp_path):
    cfg = RetrievalConfig(cache_dir=tmp_path / "cache", mode=Mode.REPLAY, rate_limits={})
    spec = make_spec(bbox, image_availability=0.5)
    points, _, _, _ = generate_city(spec, cfg)
    retriever = Retriever(cfg)
    statuses = {retriever.fetch_street_view(p).available for p in points[:40]}
    assert statuses == {True, False}
