"""Tests for suite loading and rule-based judging."""

from __future__ import annotations

import itertools
import json
import random
import time

import pytest

from actsynth.errors import EvalError, SuiteSchemaError
from actsynth.eval_engine import (
    BannedRegion,
    BenchmarkSample,
    CorrectRegion,
    Prediction,
    Verdict,
    evaluate_suite,
    hit,
    judge_sample,
    load_predictions,
    load_suite,
    to_json,
)
from actsynth.geometry import Point, Rect

SIZE = (100, 100)


def _sample(correct, banned=(), sample_id="s1", modality="Canvas", size=SIZE) -> BenchmarkSample:
    return BenchmarkSample(
        id=sample_id,
        modality=modality,
        instruction="",
        image_ref="img.png",
        image_size=size,
        correct_regions=list(correct),
        banned_regions=list(banned),
    )


def _pred(*points, sample_id="s1") -> Prediction:
    return Prediction(sample_id, tuple(Point(*p) for p in points))


def _oracle(sample: BenchmarkSample, points: list[Point]) -> bool:
    """Brute force: enumerate every order-preserving assignment of points to ranks."""
    inb = [p for p in points if 0 <= p.x <= sample.image_size[0] and 0 <= p.y <= sample.image_size[1]]
    if not points:
        return False
    if any(hit(b.shape, p) for b in sample.banned_regions for p in inb):
        return False
    if not sample.ranked:
        return all(any(hit(r.shape, p) for p in inb) for r in sample.correct_regions)
    ranks = sorted({r.rank for r in sample.correct_regions})
    for idx in itertools.combinations(range(len(inb)), len(ranks)):
        ok = True
        for rank, i in zip(ranks, idx, strict=True):
            if not any(hit(r.shape, inb[i]) for r in sample.correct_regions if r.rank == rank):
                ok = False
                break
        if ok:
            return True
    return False


def _random_case(rng: random.Random) -> tuple[BenchmarkSample, list[Point]]:
    def rect():
        x, y = rng.randint(0, 80), rng.randint(0, 80)
        return Rect(x, y, x + rng.randint(2, 20), y + rng.randint(2, 20))

    n_regions = rng.randint(1, 6)
    ranked = rng.random() < 0.5
    correct = [CorrectRegion(rect(), rng.randint(0, 5) if ranked else None) for _ in range(n_regions)]
    banned = [BannedRegion(rect()) for _ in range(rng.randint(0, 2))]
    points = [Point(rng.randint(-5, 105), rng.randint(-5, 105)) for _ in range(rng.randint(0, 6))]
    # bias points into regions so successes are common
    for i in range(len(points)):
        if rng.random() < 0.6:
            r = rng.choice(correct).shape
            points[i] = Point(rng.uniform(r.x1, r.x2), rng.uniform(r.y1, r.y2))
    return _sample(correct, banned), points


class TestJudgeSample:
    def test_banned_first(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10))], [BannedRegion(Rect(50, 50, 60, 60))])
        assert judge_sample(sample, _pred((5, 5), (55, 55))) == Verdict(False, "Banned")

    def test_ranked_order(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10), 0), CorrectRegion(Rect(90, 90, 100, 100), 1)])
        assert judge_sample(sample, _pred((5, 5), (95, 95))).success
        assert judge_sample(sample, _pred((95, 95), (5, 5))) == Verdict(False, "OrderMismatch")

    def test_unranked_order_free(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10)), CorrectRegion(Rect(90, 90, 100, 100))])
        assert judge_sample(sample, _pred((95, 95), (5, 5))).success

    def test_rank_with_two_regions(self):
        sample = _sample(
            [
                CorrectRegion(Rect(0, 0, 10, 10), 0),
                CorrectRegion(Rect(20, 20, 30, 30), 0),
                CorrectRegion(Rect(90, 90, 100, 100), 1),
            ]
        )
        assert judge_sample(sample, _pred((25, 25), (95, 95))).success

    def test_intermediate_points_tolerated(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10), 0), CorrectRegion(Rect(90, 90, 100, 100), 1)])
        assert judge_sample(sample, _pred((5, 5), (50, 50), (60, 60), (95, 95))).success

    def test_uncovered(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10)), CorrectRegion(Rect(90, 90, 100, 100))])
        assert judge_sample(sample, _pred((5, 5))) == Verdict(False, "UncoveredRegion")

    def test_empty(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10))])
        assert judge_sample(sample, _pred()) == Verdict(False, "Empty")

    def test_out_of_bounds_hits_nothing(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 100, 100))], [BannedRegion(Rect(90, 90, 100, 100))])
        assert judge_sample(sample, _pred((150, 150), (5, 5))).success
        assert judge_sample(sample, _pred((150, 150))) == Verdict(False, "UncoveredRegion")

    def test_id_mismatch(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10))])
        with pytest.raises(EvalError):
            judge_sample(sample, _pred((5, 5), sample_id="other"))

    def test_adding_banned_hit_flips(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10))], [BannedRegion(Rect(50, 50, 60, 60))])
        assert judge_sample(sample, _pred((5, 5))).success
        assert not judge_sample(sample, _pred((5, 5), (52, 52))).success

    def test_permutation_invariance_unranked(self):
        rng = random.Random(5)
        for _ in range(300):
            sample, points = _random_case(rng)
            if sample.ranked:
                continue
            sample.banned_regions.clear()
            shuffled = points[:]
            rng.shuffle(shuffled)
            a = judge_sample(sample, Prediction("s1", tuple(points)))
            b = judge_sample(sample, Prediction("s1", tuple(shuffled)))
            assert a.success == b.success


class TestOracleEquivalence:
    def test_randomized_cases(self):
        rng = random.Random(2024)
        for _ in range(2000):
            sample, points = _random_case(rng)
            verdict = judge_sample(sample, Prediction("s1", tuple(points)))
            assert verdict.success == _oracle(sample, points)
            assert (verdict.failed_rule is None) == verdict.success

    @pytest.mark.slow
    def test_full_scale(self):
        rng = random.Random(7)
        cases = [_random_case(rng) for _ in range(10_000)]
        start = time.perf_counter()
        verdicts = [judge_sample(s, Prediction("s1", tuple(p))) for s, p in cases]
        assert time.perf_counter() - start < 10
        for (sample, points), verdict in zip(cases, verdicts, strict=True):
            assert verdict.success == _oracle(sample, points)


class TestEvaluateSuite:
    def test_all_success(self):
        samples = [_sample([CorrectRegion(Rect(0, 0, 10, 10))], sample_id=f"s{i}") for i in range(2)]
        preds = [_pred((5, 5), sample_id=f"s{i}") for i in range(2)]
        assert evaluate_suite(samples, preds).overall_success_rate == 1.0

    def test_missing_prediction_fails(self):
        report = evaluate_suite([_sample([CorrectRegion(Rect(0, 0, 10, 10))])], [])
        assert report.overall_success_rate == 0.0
        assert not report.per_sample["s1"].success

    def test_benchmark_sized_suite(self):
        samples = [_sample([CorrectRegion(Rect(0, 0, 10, 10))], sample_id=f"s{i}") for i in range(206)]
        k = 91
        preds = [_pred((5, 5) if i < k else (50, 50), sample_id=f"s{i}") for i in range(206)]
        report = evaluate_suite(samples, preds)
        assert report.overall_success_rate == k / 206
        assert report.successes == k

    def test_duplicate_predictions(self):
        sample = _sample([CorrectRegion(Rect(0, 0, 10, 10))])
        with pytest.raises(EvalError):
            evaluate_suite([sample], [_pred((5, 5)), _pred((6, 6))])

    def test_per_modality(self):
        samples = [
            _sample([CorrectRegion(Rect(0, 0, 10, 10))], sample_id="a", modality="Table"),
            _sample([CorrectRegion(Rect(0, 0, 10, 10))], sample_id="b", modality="Table"),
            _sample([CorrectRegion(Rect(0, 0, 10, 10))], sample_id="c", modality="Text"),
        ]
        preds = [_pred((5, 5), sample_id="a"), _pred((50, 50), sample_id="b"), _pred((1, 1), sample_id="c")]
        report = evaluate_suite(samples, preds)
        assert report.per_modality == {"Text": 1.0, "Table": 0.5}
        assert to_json(report)["per_sample"]["b"] == {"success": False, "failed_rule": "UncoveredRegion"}


def _write_suite(tmp_path, samples):
    path = tmp_path / "suite.json"
    path.write_text(json.dumps({"samples": samples}), encoding="utf-8")
    return path


def _raw_sample(**overrides):
    data = {
        "id": "s1",
        "modality": "Table",
        "instruction": "select cell H11",
        "image": "t.png",
        "image_size": [100, 100],
        "correct_regions": [{"shape": {"rect": [0, 0, 10, 10]}}],
        "banned_regions": [],
    }
    data.update(overrides)
    return data


class TestLoadSuite:
    def test_minimal(self, tmp_path):
        samples = load_suite(_write_suite(tmp_path, [_raw_sample()]))
        assert len(samples) == 1
        assert samples[0].correct_regions[0].shape == Rect(0, 0, 10, 10)

    def test_polygon_region(self, tmp_path):
        poly = {"polygon": [[0, 0], [10, 0], [5, 8]]}
        samples = load_suite(_write_suite(tmp_path, [_raw_sample(correct_regions=[{"shape": poly}])]))
        assert len(samples[0].correct_regions[0].shape.vertices) == 3

    def test_mixed_ranks(self, tmp_path):
        regions = [{"shape": {"rect": [0, 0, 10, 10]}, "rank": 0}, {"shape": {"rect": [20, 20, 30, 30]}}]
        with pytest.raises(SuiteSchemaError) as exc:
            load_suite(_write_suite(tmp_path, [_raw_sample(correct_regions=regions)]))
        assert exc.value.sample_id == "s1"
        assert exc.value.field_path == "correct_regions"

    def test_out_of_bounds(self, tmp_path):
        regions = [{"shape": {"rect": [90, 90, 110, 100]}}]
        with pytest.raises(SuiteSchemaError) as exc:
            load_suite(_write_suite(tmp_path, [_raw_sample(correct_regions=regions)]))
        assert exc.value.field_path == "correct_regions[0].shape"

    def test_bad_modality(self, tmp_path):
        with pytest.raises(SuiteSchemaError):
            load_suite(_write_suite(tmp_path, [_raw_sample(modality="Audio")]))

    def test_degenerate_polygon(self, tmp_path):
        poly = {"polygon": [[0, 0], [5, 5], [10, 10]]}
        with pytest.raises(SuiteSchemaError):
            load_suite(_write_suite(tmp_path, [_raw_sample(correct_regions=[{"shape": poly}])]))

    def test_object_vertex(self, tmp_path):
        poly = {"polygon": [{"x": 1, "y": 1}, [50, 1], [1, 50]]}
        with pytest.raises(SuiteSchemaError) as exc:
            load_suite(_write_suite(tmp_path, [_raw_sample(correct_regions=[{"shape": poly}])]))
        assert exc.value.sample_id == "s1"
        assert exc.value.field_path == "correct_regions[0].shape"

    def test_invalid_utf8(self, tmp_path):
        path = tmp_path / "suite.json"
        path.write_bytes(b'{"samples": ["\xff"]}')
        with pytest.raises(SuiteSchemaError, match="invalid UTF-8"):
            load_suite(path)


class TestLoadPredictions:
    def test_jsonl(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"sample_id": "s1", "points": [[1, 2], [3, 4]]}\n\n', encoding="utf-8")
        preds = load_predictions(path)
        assert preds == [Prediction("s1", (Point(1, 2), Point(3, 4)))]

    def test_bad_line_reports_number(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"sample_id": "s1", "points": []}\nnot json\n', encoding="utf-8")
        with pytest.raises(SuiteSchemaError) as exc:
            load_predictions(path)
        assert exc.value.field_path == "line 2"

    def test_invalid_utf8_line(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_bytes(b'{"sample_id": "s1", "points": []}\n{"sample_id": "\xfe"}\n')
        with pytest.raises(SuiteSchemaError) as exc:
            load_predictions(path)
        assert exc.value.field_path == "line 2"

    def test_object_point(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text('{"sample_id": "s1", "points": [{"x": 1, "y": 2}]}\n', encoding="utf-8")
        with pytest.raises(SuiteSchemaError) as exc:
            load_predictions(path)
        assert exc.value.field_path == "line 1.points"
