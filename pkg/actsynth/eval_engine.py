"""Benchmark suite loading and rule-based judging of multi-point predictions.

A prediction is judged by three rules applied in priority order:

1. any in-bounds point inside a banned region fails the sample;
2. ranked correct regions must be hit by a strictly index-increasing
   subsequence of the points, one rank at a time in ascending order;
3. unranked correct regions must each contain at least one point.

Points outside the image hit nothing. Region borders count as inside.
"""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, get_args

from actsynth.errors import EvalError, GeometryError, SuiteSchemaError
from actsynth.geometry import Point, Polygon, Rect, point_in_polygon, point_in_rect, validate_polygon

logger = logging.getLogger(__name__)

Modality = Literal["GUI", "Text", "Table", "Canvas", "Image"]
FailedRule = Literal["Banned", "OrderMismatch", "UncoveredRegion", "Empty"]
Shape = Rect | Polygon

MODALITIES: tuple[str, ...] = get_args(Modality)
BENCHMARK_SIZE = 206
FLUCTUATION_POINTS = 3.0


@dataclass(frozen=True)
class CorrectRegion:
    shape: Shape
    rank: int | None = None


@dataclass(frozen=True)
class BannedRegion:
    shape: Shape


@dataclass
class BenchmarkSample:
    id: str
    modality: Modality
    instruction: str
    image_ref: str
    image_size: tuple[int, int]
    correct_regions: list[CorrectRegion]
    banned_regions: list[BannedRegion] = field(default_factory=list)

    @property
    def ranked(self) -> bool:
        return self.correct_regions[0].rank is not None


@dataclass(frozen=True)
class Prediction:
    sample_id: str
    points: tuple[Point, ...]


@dataclass(frozen=True)
class Verdict:
    success: bool
    failed_rule: FailedRule | None = None


@dataclass
class Report:
    overall_success_rate: float
    per_modality: dict[str, float]
    per_sample: dict[str, Verdict]
    total: int = 0
    successes: int = 0


def hit(shape: Shape, p: Point) -> bool:
    if isinstance(shape, Rect):
        return point_in_rect(p, shape)
    return point_in_polygon(p, shape)


def _in_bounds(p: Point, size: tuple[int, int]) -> bool:
    return 0 <= p[0] <= size[0] and 0 <= p[1] <= size[1]


def _ranked_verdict(ranks: list[list[Shape]], points: Sequence[Point]) -> Verdict:
    # Greedy earliest match is optimal for order-preserving subsequence assignment.
    cursor = 0
    for shapes in ranks:
        while cursor < len(points) and not any(hit(s, points[cursor]) for s in shapes):
            cursor += 1
        if cursor == len(points):
            break
        cursor += 1
    else:
        return Verdict(True)

    for shapes in ranks:
        if not any(hit(s, p) for s in shapes for p in points):
            return Verdict(False, "UncoveredRegion")
    return Verdict(False, "OrderMismatch")


def judge_sample(sample: BenchmarkSample, pred: Prediction) -> Verdict:
    """Judge one prediction against one sample."""
    if pred.sample_id != sample.id:
        raise EvalError(f"Prediction for {pred.sample_id!r} judged against sample {sample.id!r}")
    if not pred.points:
        return Verdict(False, "Empty")

    points = [p for p in pred.points if _in_bounds(p, sample.image_size)]
    for banned in sample.banned_regions:
        if any(hit(banned.shape, p) for p in points):
            return Verdict(False, "Banned")

    if sample.ranked:
        grouped: dict[int, list[Shape]] = defaultdict(list)
        for region in sample.correct_regions:
            grouped[region.rank].append(region.shape)  # type: ignore[index]
        return _ranked_verdict([grouped[r] for r in sorted(grouped)], points)

    for region in sample.correct_regions:
        if not any(hit(region.shape, p) for p in points):
            return Verdict(False, "UncoveredRegion")
    return Verdict(True)


def _judge_pair(pair: tuple[BenchmarkSample, Prediction | None]) -> Verdict:
    sample, pred = pair
    if pred is None:
        return Verdict(False, "Empty")
    return judge_sample(sample, pred)


def evaluate_suite(
    samples: Sequence[BenchmarkSample],
    predictions: Iterable[Prediction],
    *,
    workers: int = 1,
) -> Report:
    """Judge every sample; a missing prediction counts as a failure."""
    by_id: dict[str, Prediction] = {}
    for pred in predictions:
        if pred.sample_id in by_id:
            raise EvalError(f"Duplicate prediction for sample {pred.sample_id!r}")
        by_id[pred.sample_id] = pred

    known = {s.id for s in samples}
    for unknown in sorted(set(by_id) - known):
        logger.warning("ignoring prediction for unknown sample %s", unknown)

    pairs = [(s, by_id.get(s.id)) for s in samples]
    if workers > 1 and len(pairs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(_judge_pair, pairs, chunksize=64))
    else:
        verdicts = [_judge_pair(pair) for pair in pairs]

    per_sample = {s.id: v for s, v in zip(samples, verdicts, strict=True)}
    totals: Counter[str] = Counter()
    wins: Counter[str] = Counter()
    for s, v in zip(samples, verdicts, strict=True):
        totals[s.modality] += 1
        wins[s.modality] += int(v.success)

    successes = sum(wins.values())
    total = len(samples)
    return Report(
        overall_success_rate=successes / total if total else 0.0,
        per_modality={m: wins[m] / totals[m] for m in MODALITIES if totals[m]},
        per_sample=per_sample,
        total=total,
        successes=successes,
    )


def shape_from_dict(data: Any, sample_id: str | None, path: str) -> Shape:
    if not isinstance(data, dict) or len(data) != 1:
        raise SuiteSchemaError(sample_id, path, "shape must be an object with exactly one of 'rect' or 'polygon'")
    try:
        if "rect" in data:
            coords = data["rect"]
            if not isinstance(coords, list) or len(coords) != 4:
                raise SuiteSchemaError(sample_id, f"{path}.rect", "rect needs 4 numbers")
            rect = Rect(*(float(v) for v in coords))
            if rect.area <= 0:
                raise SuiteSchemaError(sample_id, f"{path}.rect", "rect has zero area")
            return rect
        if "polygon" in data:
            verts = data["polygon"]
            if not isinstance(verts, list):
                raise SuiteSchemaError(sample_id, f"{path}.polygon", "polygon must be a list of points")
            poly = Polygon(tuple(Point(float(v[0]), float(v[1])) for v in verts))
            return validate_polygon(poly)
    except GeometryError as e:
        raise SuiteSchemaError(sample_id, path, str(e)) from e
    except (TypeError, ValueError, IndexError, KeyError) as e:
        raise SuiteSchemaError(sample_id, path, f"malformed coordinates: {e}") from e
    raise SuiteSchemaError(sample_id, path, "shape must contain 'rect' or 'polygon'")


def shape_to_dict(shape: Shape) -> dict:
    if isinstance(shape, Rect):
        return {"rect": shape.as_list()}
    return {"polygon": shape.as_list()}


def _check_bounds(shape: Shape, size: tuple[int, int], sample_id: str, path: str) -> None:
    bounds = shape if isinstance(shape, Rect) else shape.bounds()
    if not bounds.within(*size):
        raise SuiteSchemaError(sample_id, path, f"region {bounds.as_list()} extends past image bounds {list(size)}")


def sample_from_dict(data: Any, index: int = 0) -> BenchmarkSample:
    """Validate one suite entry and build a BenchmarkSample."""
    if not isinstance(data, dict):
        raise SuiteSchemaError(None, f"samples[{index}]", "sample must be an object")
    sample_id = data.get("id")
    if not isinstance(sample_id, str) or not sample_id:
        raise SuiteSchemaError(None, f"samples[{index}].id", "missing or non-string id")

    modality = data.get("modality")
    if modality not in MODALITIES:
        raise SuiteSchemaError(sample_id, "modality", f"must be one of {', '.join(MODALITIES)}, got {modality!r}")

    size = data.get("image_size")
    if (
        not isinstance(size, list)
        or len(size) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in size)
    ):
        raise SuiteSchemaError(sample_id, "image_size", "must be [width, height] positive integers")
    image_size = (size[0], size[1])

    raw_correct = data.get("correct_regions")
    if not isinstance(raw_correct, list) or not raw_correct:
        raise SuiteSchemaError(sample_id, "correct_regions", "at least one correct region is required")

    correct: list[CorrectRegion] = []
    for i, region in enumerate(raw_correct):
        path = f"correct_regions[{i}]"
        if not isinstance(region, dict):
            raise SuiteSchemaError(sample_id, path, "region must be an object")
        shape = shape_from_dict(region.get("shape"), sample_id, f"{path}.shape")
        _check_bounds(shape, image_size, sample_id, f"{path}.shape")
        rank = region.get("rank")
        if rank is not None and (isinstance(rank, bool) or not isinstance(rank, int) or rank < 0):
            raise SuiteSchemaError(sample_id, f"{path}.rank", "rank must be a non-negative integer")
        correct.append(CorrectRegion(shape, rank))

    ranked = [r.rank is not None for r in correct]
    if any(ranked) and not all(ranked):
        raise SuiteSchemaError(
            sample_id, "correct_regions", "either all correct regions have a rank or none of them do"
        )

    banned: list[BannedRegion] = []
    raw_banned = data.get("banned_regions", [])
    if not isinstance(raw_banned, list):
        raise SuiteSchemaError(sample_id, "banned_regions", "must be a list")
    for i, region in enumerate(raw_banned):
        path = f"banned_regions[{i}]"
        if not isinstance(region, dict):
            raise SuiteSchemaError(sample_id, path, "region must be an object")
        shape = shape_from_dict(region.get("shape"), sample_id, f"{path}.shape")
        _check_bounds(shape, image_size, sample_id, f"{path}.shape")
        banned.append(BannedRegion(shape))

    return BenchmarkSample(
        id=sample_id,
        modality=modality,
        instruction=str(data.get("instruction", "")),
        image_ref=str(data.get("image", "")),
        image_size=image_size,
        correct_regions=correct,
        banned_regions=banned,
    )


def sample_to_dict(sample: BenchmarkSample) -> dict:
    correct = []
    for region in sample.correct_regions:
        entry: dict[str, Any] = {"shape": shape_to_dict(region.shape)}
        if region.rank is not None:
            entry["rank"] = region.rank
        correct.append(entry)
    return {
        "id": sample.id,
        "modality": sample.modality,
        "instruction": sample.instruction,
        "image": sample.image_ref,
        "image_size": list(sample.image_size),
        "correct_regions": correct,
        "banned_regions": [{"shape": shape_to_dict(b.shape)} for b in sample.banned_regions],
    }


def load_suite(path: Path) -> list[BenchmarkSample]:
    """Load and validate a benchmark suite file."""
    with open(path, "rb") as f:
        try:
            data = json.loads(f.read().decode("utf-8"))
        except UnicodeDecodeError as e:
            raise SuiteSchemaError(None, "$", f"invalid UTF-8 at byte {e.start}") from e
        except json.JSONDecodeError as e:
            raise SuiteSchemaError(None, "$", f"invalid JSON: {e}") from e

    if not isinstance(data, dict) or not isinstance(data.get("samples"), list):
        raise SuiteSchemaError(None, "samples", "suite root must be an object with a 'samples' list")

    samples: list[BenchmarkSample] = []
    seen: set[str] = set()
    for i, entry in enumerate(data["samples"]):
        sample = sample_from_dict(entry, i)
        if sample.id in seen:
            raise SuiteSchemaError(sample.id, "id", "duplicate sample id")
        seen.add(sample.id)
        samples.append(sample)

    if len(samples) != BENCHMARK_SIZE:
        logger.info("loaded %d samples from %s (full benchmark has %d)", len(samples), path, BENCHMARK_SIZE)
    return samples


def load_predictions(path: Path) -> list[Prediction]:
    """Load a JSON-lines prediction file."""
    predictions: list[Prediction] = []
    with open(path, "rb") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            where = f"line {line_no}"
            try:
                data = json.loads(line.decode("utf-8"))
            except UnicodeDecodeError as e:
                raise SuiteSchemaError(None, where, f"invalid UTF-8 at byte {e.start}") from e
            except json.JSONDecodeError as e:
                raise SuiteSchemaError(None, where, f"invalid JSON: {e}") from e
            if not isinstance(data, dict) or not isinstance(data.get("sample_id"), str):
                raise SuiteSchemaError(None, f"{where}.sample_id", "missing or non-string sample_id")
            raw_points = data.get("points")
            if not isinstance(raw_points, list):
                raise SuiteSchemaError(data["sample_id"], f"{where}.points", "points must be a list")
            try:
                points = tuple(Point(float(p[0]), float(p[1])) for p in raw_points)
            except (TypeError, ValueError, IndexError, KeyError) as e:
                raise SuiteSchemaError(data["sample_id"], f"{where}.points", f"malformed point: {e}") from e
            predictions.append(Prediction(data["sample_id"], points))
    return predictions


def to_json(report: Report) -> dict:
    """Convert a report to a JSON-serializable dictionary."""
    return {
        "overall": report.overall_success_rate,
        "total": report.total,
        "successes": report.successes,
        "per_modality": dict(report.per_modality),
        "per_sample": {
            sample_id: {"success": v.success, "failed_rule": v.failed_rule}
            for sample_id, v in report.per_sample.items()
        },
    }


def write_report(report: Report, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_json(report), f, indent=2)
        f.write("\n")
