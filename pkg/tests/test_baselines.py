import json
import random

import pytest

from svllm.baselines import (GbrtConfig, GbrtModel, KnnConfig, gbrt_fit,
                             gbrt_predict, import_external_predictions, knn_predict)
from svllm.errors import (DegenerateFeatures, EmptyTraining, KTooLarge, SchemaError,
                          TooFewSamples, UnknownSampleId)
from svllm.geo import GeoPoint, haversine_distance


def brute_force_knn(train, query, k):
    ranked = sorted(train, key=lambda pt: (haversine_distance(pt[0], query), pt[0].id))
    top = ranked[:k]
    return sum(t for _, t in top) / k


def test_knn_identity():
    train = [(GeoPoint(1, 1, "a"), 7.0), (GeoPoint(2, 2, "b"), 9.0)]
    assert knn_predict(train, GeoPoint(1, 1, "q"), KnnConfig(k=1)) == 7.0


def test_knn_six_point_case():
    lons = [0, 1, 2, 3, 4, 10]
    targets = [1, 2, 3, 4, 5, 100]
    train = [(GeoPoint(0, lon, f"t{lon}"), t) for lon, t in zip(lons, targets)]
    assert knn_predict(train, GeoPoint(0, 0, "q"), KnnConfig(k=5)) == 3.0


def test_knn_matches_brute_force():
    rng = random.Random(15)
    train = [(GeoPoint(rng.uniform(-5, 5), rng.uniform(-5, 5), f"t{i:04d}"),
              rng.uniform(0, 10)) for i in range(500)]
    cfg = KnnConfig(k=5)
    for j in range(50):
        q = GeoPoint(rng.uniform(-5, 5), rng.uniform(-5, 5), f"q{j}")
        assert knn_predict(train, q, cfg) == brute_force_knn(train, q, 5)


def test_knn_errors():
    with pytest.raises(EmptyTraining):
        knn_predict([], GeoPoint(0, 0, "q"))
    with pytest.raises(KTooLarge):
        knn_predict([(GeoPoint(0, 0, "a"), 1.0)], GeoPoint(0, 0, "q"), KnnConfig(k=2))


def test_gbrt_constant_targets():
    train = [((float(i), float(i % 3)), 4.5) for i in range(10)]
    model = gbrt_fit(train, GbrtConfig(rounds=3))
    assert model.init_value == 4.5
    for feats, _ in train:
        assert gbrt_predict(model, feats) == 4.5
    # every tree collapsed to a zero leaf
    assert all(t == {"value": 0.0} for t in model.trees)


def test_gbrt_step_function_exact():
    train = [((0.0,), 0.0), ((1.0,), 0.0), ((2.0,), 1.0), ((3.0,), 1.0)]
    model = gbrt_fit(train, GbrtConfig(rounds=1, max_depth=1, learning_rate=1.0))
    tree = model.trees[0]
    assert tree["feature"] == 0 and tree["threshold"] == 1.5
    preds = [gbrt_predict(model, f) for f, _ in train]
    assert preds == [0.0, 0.0, 1.0, 1.0]
    assert model.train_sse[-1] == 0.0


def test_gbrt_more_rounds_no_worse():
    rng = random.Random(31)
    def f(x):
        return 3.0 if x < 0.3 else (-1.0 if x < 0.7 else 5.0)
    train = [((x,), f(x)) for x in (rng.uniform(0, 1) for _ in range(120))]
    cfg1 = GbrtConfig(rounds=1, learning_rate=0.3)
    cfg10 = GbrtConfig(rounds=10, learning_rate=0.3)
    m1 = gbrt_fit(train, cfg1)
    m10 = gbrt_fit(train, cfg10)
    assert m10.train_sse[-1] <= m1.train_sse[-1]


def test_gbrt_sse_non_increasing():
    rng = random.Random(41)
    for trial in range(5):
        train = [((rng.uniform(-2, 2), rng.uniform(-2, 2)),
                  rng.gauss(0, 3)) for _ in range(60)]
        model = gbrt_fit(train, GbrtConfig(rounds=10))
        for a, b in zip(model.train_sse, model.train_sse[1:]):
            assert b <= a * (1 + 1e-12) + 1e-12


def test_gbrt_row_permutation_invariance():
    rng = random.Random(8)
    train = [((rng.uniform(0, 1), rng.uniform(0, 1)), rng.gauss(0, 1))
             for _ in range(80)]
    shuffled = list(train)
    rng.shuffle(shuffled)
    m1 = gbrt_fit(train, GbrtConfig(rounds=5))
    m2 = gbrt_fit(shuffled, GbrtConfig(rounds=5))
    assert json.dumps(m1.as_dict(), sort_keys=True) == json.dumps(m2.as_dict(), sort_keys=True)


def test_gbrt_errors():
    with pytest.raises(TooFewSamples):
        gbrt_fit([((1.0,), 2.0)])
    with pytest.raises(DegenerateFeatures):
        gbrt_fit([((1.0, 2.0), 1.0), ((1.0, 2.0), 5.0)])
    # identical rows with identical targets -> constant model, no error
    model = gbrt_fit([((1.0,), 3.0), ((1.0,), 3.0)])
    assert gbrt_predict(model, (1.0,)) == 3.0


def test_gbrt_serialization_round_trip(tmp_path):
    rng = random.Random(12)
    train = [((rng.uniform(0, 1), rng.uniform(0, 1)), rng.gauss(0, 1))
             for _ in range(100)]
    model = gbrt_fit(train, GbrtConfig(rounds=10))
    path = tmp_path / "model.json"
    model.save(path)
    loaded = GbrtModel.load(path)
    for _ in range(100):
        feats = (rng.uniform(-1, 2), rng.uniform(-1, 2))
        assert gbrt_predict(loaded, feats) == gbrt_predict(model, feats)


def test_external_predictions(tmp_path):
    path = tmp_path / "ext.csv"
    path.write_text("sample_id,task,prediction\n"
                    "s1,population,4.2\n"
                    "s2,population,1.0\n"
                    "s3,ndvi,9.9\n")
    rows = import_external_predictions(path, {"s1", "s2", "s3"}, {"population", "ndvi"})
    assert rows == [("s1", "population", 4.2), ("s2", "population", 1.0),
                    ("s3", "ndvi", 9.9)]


def test_external_predictions_missing_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("sample_id,prediction\ns1,4.2\n")
    with pytest.raises(SchemaError):
        import_external_predictions(path, {"s1"}, {"population"})


def test_external_predictions_unknown_id(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("sample_id,task,prediction\ns1,population,4.2\nzz,population,1.0\n")
    with pytest.raises(UnknownSampleId, match="row 3"):
        import_external_predictions(path, {"s1"}, {"population"})
