import math
import random

import pytest

from svllm.binning import fit_bin_scale
from svllm.dataset import PredictionRecord
from svllm.errors import EmptyInput, LengthMismatch, MissingScale, ZeroVariance
from svllm.evaluation import evaluate_run, mae, r_squared, rmse


def oracle_mae(y, yh):
    total = 0.0
    for a, b in zip(y, yh):
        total += abs(a - b)
    return total / len(y)


def oracle_rmse(y, yh):
    total = 0.0
    for a, b in zip(y, yh):
        total += (a - b) ** 2
    return math.sqrt(total / len(y))


def oracle_r2(y, yh):
    mean = sum(y) / len(y)
    ss_tot = sum((a - mean) ** 2 for a in y)
    ss_res = sum((a - b) ** 2 for a, b in zip(y, yh))
    return 1 - ss_res / ss_tot


def test_perfect_prediction():
    y = [3.0, 1.0, 4.0]
    assert mae(y, y) == 0.0
    assert rmse(y, y) == 0.0
    assert r_squared(y, y) == 1.0


def test_hand_cases():
    y, yh = [1, 2, 3], [2, 2, 2]
    assert mae(y, yh) == pytest.approx(2 / 3, abs=1e-12)
    assert rmse(y, yh) == pytest.approx(math.sqrt(2 / 3), abs=1e-12)
    assert r_squared(y, yh) == pytest.approx(0.0, abs=1e-12)
    assert mae([5], [2]) == 3.0


def test_zero_variance():
    with pytest.raises(ZeroVariance):
        r_squared([4, 4, 4], [1, 2, 3])


def test_validation_errors():
    with pytest.raises(LengthMismatch):
        mae([1, 2], [1])
    with pytest.raises(EmptyInput):
        rmse([], [])


def test_oracle_equivalence_random():
    rng = random.Random(77)
    for _ in range(300):
        n = rng.randint(2, 200)
        y = [rng.gauss(0, 5) for _ in range(n)]
        yh = [v + rng.gauss(0, 2) for v in y]
        assert mae(y, yh) == pytest.approx(oracle_mae(y, yh), rel=1e-9)
        assert rmse(y, yh) == pytest.approx(oracle_rmse(y, yh), rel=1e-9)
        assert r_squared(y, yh) == pytest.approx(oracle_r2(y, yh), rel=1e-9, abs=1e-9)
        assert mae(y, yh) <= rmse(y, yh)


def test_rmse_error_scaling():
    rng = random.Random(2)
    y = [rng.gauss(0, 3) for _ in range(50)]
    errs = [rng.gauss(0, 1) for _ in range(50)]
    base = rmse(y, [a + e for a, e in zip(y, errs)])
    for c in (-2.0, 0.5, 3.0):
        scaled = rmse(y, [a + c * e for a, e in zip(y, errs)])
        assert scaled == pytest.approx(abs(c) * base, rel=1e-12)


def test_r2_shift_scale_invariance():
    rng = random.Random(6)
    y = [rng.gauss(10, 4) for _ in range(80)]
    yh = [v + rng.gauss(0, 2) for v in y]
    base = r_squared(y, yh)
    for a, b in ((2.0, 5.0), (-3.0, 1.0), (0.25, -7.0)):
        r2 = r_squared([a * v + b for v in y], [a * v + b for v in yh])
        assert r2 == pytest.approx(base, abs=1e-12)


def _pred(city, task, model, sid, true_bin, pred_bin, true_value=None):
    return PredictionRecord(sample_id=sid, city=city, task=task, model=model,
                            pred_bin=pred_bin, true_bin=true_bin,
                            true_value=true_value)


def test_evaluate_run_groups_and_spaces():
    rng = random.Random(1)
    values = [rng.uniform(0, 100) for _ in range(200)]
    scale = fit_bin_scale(values, "population")
    preds = []
    for i, v in enumerate(values[:50]):
        from svllm.binning import to_bin
        tb = to_bin(scale, v).value
        preds.append(_pred("cityA", "population", "m1", f"s{i}", tb, tb, true_value=v))
    report = evaluate_run(preds, {"population": scale})
    bin_rows = [r for r in report.rows if r.space == "bin"]
    unit_rows = [r for r in report.rows if r.space == "unit"]
    assert len(bin_rows) == 1 and len(unit_rows) == 1
    assert bin_rows[0].r2 == pytest.approx(1.0, abs=1e-12)
    assert bin_rows[0].mae == 0.0
    # Unit space inverts through representatives: close but not exact.
    assert unit_rows[0].r2 > 0.99
    assert unit_rows[0].mae <= unit_rows[0].rmse


def test_evaluate_run_missing_scale():
    preds = [_pred("c", "ndvi", "m", "s1", 1.0, 1.0, true_value=0.5),
             _pred("c", "ndvi", "m", "s2", 2.0, 2.0, true_value=0.6)]
    with pytest.raises(MissingScale):
        evaluate_run(preds, {})
    # bin space only works without scales
    report = evaluate_run(preds, {}, spaces=("bin",))
    assert len(report.rows) == 1


def test_evaluate_run_shuffled_predictions_score_poorly():
    rng = random.Random(9)
    true_bins = [round(rng.uniform(0, 9.9), 1) for _ in range(300)]
    shuffled = list(true_bins)
    rng.shuffle(shuffled)
    preds = [_pred("c", "population", "m", f"s{i}", tb, pb)
             for i, (tb, pb) in enumerate(zip(true_bins, shuffled))]
    report = evaluate_run(preds, {}, spaces=("bin",))
    assert report.rows[0].r2 <= 0.1
