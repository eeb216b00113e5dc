import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dietsynth import (
    BatchMinMax,
    ConfigError,
    DataError,
    EvalReport,
    OptimalRanges,
    ProfileType,
    Reference,
    best_threshold,
    classify,
    evaluate,
    healthy_score,
    load_ranges,
    mahalanobis,
    normalize,
)
from dietsynth.analysis import IntakeRow, IntakeVector
from dietsynth.scoring import (
    ScoreRecord,
    mahalanobis_cov,
    parse_norm,
    read_scores_csv,
    score_rows,
    threshold_sweep,
    write_scores_csv,
)

H, U, M, V = ProfileType.Healthy, ProfileType.Unhealthy, ProfileType.Medium, ProfileType.Variable
ONE_THREE = OptimalRanges((1,) * 9, (3,) * 9)


def rec(score, actual, predicted=None, ptype=None):
    predicted = predicted or classify(score)
    return ScoreRecord("s", 1, 0.0, 1 - score, score, predicted, actual, "", ptype or actual)


def test_midpoint_is_zero():
    assert mahalanobis(np.full(9, 2.0), ONE_THREE) == 0.0


def test_all_ones_off():
    assert mahalanobis(np.full(9, 3.0), ONE_THREE) == pytest.approx(math.sqrt(9 * 1.0), rel=1e-15)


def test_single_coordinate():
    x = np.full(9, 2.0)
    x[0] = 4.0
    assert mahalanobis(x, ONE_THREE) == pytest.approx(2.0, rel=1e-15)


def test_sigma_floor_for_point_ranges():
    r = OptimalRanges((2,) * 9, (2,) * 9)
    assert np.all(r.sigma == 0.5)
    x = np.full(9, 2.0)
    x[3] = 3.0
    assert mahalanobis(x, r) == pytest.approx(2.0)


def test_default_ranges():
    r = load_ranges()
    assert r.names[0] == "fruits" and r.names[-1] == "level_2"
    assert np.all(r.upper >= np.asarray(r.lower))
    np.testing.assert_allclose(r.covariance, np.diag(r.sigma ** 2))


def test_ranges_validation(tmp_path):
    with pytest.raises(ConfigError):
        OptimalRanges((3,) * 9, (1,) * 9)
    with pytest.raises(ConfigError):
        OptimalRanges.from_json([{"group": "fruits", "lower": 1, "upper": 2}])
    bad = tmp_path / "r.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_ranges(bad)


@settings(max_examples=200)
@given(
    arrays(float, 9, elements=st.floats(0, 50)),
    arrays(float, 9, elements=st.floats(0, 10)),
    arrays(float, 9, elements=st.floats(0, 10)),
)
def test_matches_scalar_formula(x, lo, width):
    r = OptimalRanges(tuple(lo), tuple(lo + width))
    mid = lo + width / 2
    sigma = np.maximum(width / 2, 0.5)
    oracle = math.sqrt(sum(((xi - m) / s) ** 2 for xi, m, s in zip(x, mid, sigma)))
    assert mahalanobis(x, r) == pytest.approx(oracle, rel=1e-12, abs=1e-12)


def test_batch_input_matches_rows():
    rng = np.random.default_rng(0)
    xs = rng.uniform(0, 10, size=(20, 9))
    batch = mahalanobis(xs, ONE_THREE)
    assert batch.shape == (20,)
    np.testing.assert_allclose(batch, [mahalanobis(x, ONE_THREE) for x in xs], rtol=1e-14)


def test_general_covariance():
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    d = np.array([1.0, -1.0])
    expected = math.sqrt(d @ np.linalg.inv(cov) @ d)
    assert mahalanobis_cov(d, np.zeros(2), cov) == pytest.approx(expected, rel=1e-12)


def test_normalize_examples():
    np.testing.assert_allclose(normalize([0, 3, 6]), [0, 0.5, 1])
    np.testing.assert_array_equal(normalize([2, 2, 2]), [0, 0, 0])
    np.testing.assert_allclose(normalize([1, 5, 12], Reference(10)), [0.1, 0.5, 1.0])
    assert normalize([4.0], Reference(8)).tolist() == [0.5]
    with pytest.raises(DataError):
        normalize([4.0])
    with pytest.raises(ConfigError):
        Reference(0)


def test_parse_norm():
    assert parse_norm("batch") == BatchMinMax()
    assert parse_norm("reference:12.5") == Reference(12.5)
    assert str(parse_norm("reference:12.5")) == "reference:12.5"
    for bad in ("ref:1", "reference:", "reference:x", "minmax"):
        with pytest.raises(ConfigError):
            parse_norm(bad)


@settings(max_examples=100)
@given(st.lists(st.floats(0, 1e3), min_size=2, max_size=50))
def test_batch_normalize_bounds(mds):
    nmd = normalize(mds)
    assert np.all((nmd >= 0) & (nmd <= 1))
    if max(mds) > min(mds):
        assert nmd.min() == 0 and nmd.max() == 1


def test_healthy_score_examples():
    assert healthy_score(0) == 1
    assert healthy_score(1) == 0
    assert healthy_score(0.59) == pytest.approx(0.41)
    with pytest.raises(ValueError):
        healthy_score(1.2)


def test_classify_boundary():
    assert classify(0.41) is H
    assert classify(0.36) is U
    assert classify(0.0) is U
    assert classify(1.0, threshold=1.0) is U
    with pytest.raises(ValueError):
        classify(1.5)


def test_evaluate_published_counts():
    report = EvalReport(tp=1275, fn=5, fp=10, tn=1910, threshold=0.36)
    assert report.total == 3200
    assert round(float(report.accuracy) * 100, 2) == 99.53
    assert round(float(report.sensitivity) * 100, 2) == 99.61
    assert report.accuracy == Fraction(3185, 3200)


def test_evaluate_examples():
    perfect = [rec(0.9, H), rec(0.1, U), rec(0.2, M)]
    r = evaluate(perfect)
    assert (r.accuracy, r.sensitivity) == (1, 1)
    bad = [rec(0.1, H)] * 10 + [rec(0.1, U)] * 10
    r = evaluate(bad)
    assert (r.tp, r.fn, r.fp, r.tn) == (0, 10, 0, 10)
    assert r.accuracy == Fraction(1, 2) and r.sensitivity == 0
    with pytest.raises(DataError, match="variable"):
        evaluate([rec(0.9, V)])
    with pytest.raises(DataError):
        evaluate([])


def test_report_json():
    doc = EvalReport(1275, 5, 10, 1910, 0.36).to_json()
    assert doc["accuracy"] == 0.9953 and doc["sensitivity"] == 0.9961
    assert doc["confusion"]["actual_unhealthy"]["predicted_healthy"] == 10


def test_threshold_sweep_finds_separator():
    records = [rec(s, H) for s in (0.5, 0.7, 0.9)] + [rec(s, U) for s in (0.1, 0.2, 0.45)]
    best = best_threshold(records)
    assert best.accuracy == 1
    assert 0.45 < best.threshold < 0.5
    sweep = threshold_sweep(records)
    assert sweep[0].fn == 0 and sweep[-1].tp == 0


def test_sweep_prefers_sensitivity_then_lower_threshold():
    # overlapping classes: two cuts reach 3/4, the lower one keeps every healthy diet
    records = [rec(0.3, H), rec(0.8, H), rec(0.5, U), rec(0.1, U)]
    best = best_threshold(records)
    assert best.accuracy == Fraction(3, 4)
    assert best.sensitivity == 1
    assert best.threshold == pytest.approx(0.2)


def test_score_rows_and_csv(tmp_path):
    rows = [
        IntakeRow("0001", "1", 1, IntakeVector((3,) * 9), H, H),
        IntakeRow("0002", "2", 1, IntakeVector((9,) * 9), U, U),
        IntakeRow("0003", "4.1", 2, IntakeVector((4,) * 9), V, U),
    ]
    scored = score_rows(rows, load_ranges())
    assert [r.profile_type for r in scored] == [H, U, V]
    assert min(r.healthy_score for r in scored) == 0.0
    path = tmp_path / "s.csv"
    write_scores_csv(scored, path)
    assert read_scores_csv(path) == scored
    single = score_rows(rows[:1], load_ranges(), Reference(20.0))
    assert 0 <= single[0].healthy_score <= 1
    with pytest.raises(DataError):
        score_rows(rows[:1], load_ranges())


def test_extreme_threshold_flags_everything_unhealthy():
    rows = [IntakeRow(f"{i:04d}", "1", 1, IntakeVector((2 + i,) * 9), H, H) for i in range(5)]
    scored = score_rows(rows, load_ranges(), threshold=1.0)
    report = evaluate(scored, 1.0)
    assert report.tp == 0 and report.sensitivity == 0
