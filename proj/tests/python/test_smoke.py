import json

import pytest

import capita


@pytest.fixture(scope="module")
def world():
    bundle, truth = capita.synth(
        seed=3, overrides={"n_health_centers": "40", "n_districts": "4", "n_provinces": "2"}
    )
    return bundle, json.loads(truth)


def test_synth_shapes(world):
    bundle, truth = world
    assert bundle.n_visits > 0
    assert len(truth["facilities"]) == 40


def test_calibration_recovers_planted_values(world):
    bundle, _ = world
    p = capita.calibrate(bundle, "2023")
    assert p.a_low == pytest.approx(912, rel=1e-6)
    assert p.a_med == pytest.approx(1278, rel=1e-6)
    assert p.a_high == pytest.approx(1562, rel=1e-6)
    assert p.b == pytest.approx(1126, rel=1e-6)
    assert capita.Params.from_json(p.to_json()).b == p.b


def test_metrics_and_segments(world):
    bundle, _ = world
    rows = capita.compute_metrics(bundle, "2023")
    assert len(rows) == 40
    assert all(0 <= r["capture_ratio"] <= 1 for r in rows)
    seg = capita.segment(bundle, "2023")
    assert sorted(set(seg["tiers"].values())) == ["High", "Low", "Medium"]
    assert len(seg["group_median_u"]) == 5


def test_round_trip(world, tmp_path):
    bundle, _ = world
    hashes = bundle.write(tmp_path)
    assert "visits.csv" in hashes
    assert capita.load_bundle(tmp_path).same_records(bundle)


def test_payments(world):
    bundle, _ = world
    p = capita.calibrate(bundle, "2023")
    lines = capita.quarterly_schedule(p, bundle, "FY2025")
    assert len(lines) == 4 * 40
    p2 = capita.Params()
    p2.a_med, p2.b = 1278, 1126
    assert capita.capitation_amount(p2, "Medium", 0.664, 20209, 10000) == 28409196


def test_monitoring_helpers():
    assert capita.iqr_flagged([1, 2, 3, 4, 5, 6, 7, 8, 9], 100)
    assert not capita.iqr_flagged([1, 2, 3, 4, 5, 6, 7, 8, 9], 13)
    assert capita.bhattacharyya_distance([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0


def test_errors_carry_their_kind(world):
    bundle, _ = world
    with pytest.raises(capita.CapitaError) as info:
        capita.calibrate(bundle, "2023", method="lasso")
    assert info.value.kind == "InvalidArgument"
    with pytest.raises(capita.CapitaError):
        capita.load_bundle("/nonexistent/capita")
