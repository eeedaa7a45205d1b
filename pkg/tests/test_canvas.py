"""Tests for the canvas simulator: shapes, placement, styling, chrome and annotations."""

from __future__ import annotations

import json
import math
import random
from collections import Counter

import pytest
from PIL import Image

from actsynth.canvas.annotation import (
    annotation_points,
    emit_annotation,
    parse_annotation,
    scene_annotation,
)
from actsynth.canvas.chrome import ANCHOR_NORMALS, box_points, draw_chrome
from actsynth.canvas.scene import (
    CANVAS_MARGIN,
    OVERLAP_THRESHOLD,
    SceneParams,
    candidate_boxes,
    crowded_pairs,
    generate_scene,
    place_elements,
    placement_flipped,
    sample_kinds,
    sample_scene,
    sample_style,
)
from actsynth.canvas.shapes import (
    LINE_KINDS,
    SHAPE_COUNT,
    SHAPES,
    SQUARE_KINDS,
    ShapeResult,
    Style,
    get_kind,
    rasterize_shape,
    shape_extent,
)
from actsynth.errors import AnnotationError, ShapeError
from actsynth.geometry import Point, Rect, Rgb, overlap_ratio, redmean_distance

STYLE = Style(fill=Rgb(200, 40, 40), outline=Rgb(20, 20, 120), stroke_width=2)


def _canvas(w=400, h=300) -> Image.Image:
    return Image.new("RGB", (w, h), (255, 255, 255))


class TestRegistry:
    def test_count(self):
        assert SHAPE_COUNT == len(SHAPES) == 73

    def test_square_kinds(self):
        assert SQUARE_KINDS == {"circle", "square", "donut", "ring", "rounded_square"}

    def test_unknown_kind(self):
        with pytest.raises(ShapeError):
            get_kind("hexadecagon")

    def test_every_kind_rasterizes_inside_box(self):
        for name in SHAPES:
            canvas = _canvas()
            result = rasterize_shape(canvas, name, Rect(100, 80, 220, 200), STYLE)
            assert result.bbox.within(400, 300), name
            assert result.bbox.x1 <= result.center.x <= result.bbox.x2
            assert result.bbox.y1 <= result.center.y <= result.bbox.y2
            for p in [*result.vertices.values(), *result.endpoints.values()]:
                assert 0 <= p.x <= 400 and 0 <= p.y <= 300, name


class TestRasterizeShape:
    def test_rectangle_center_and_corners(self):
        result = rasterize_shape(_canvas(), "rectangle", Rect(10, 10, 110, 60), STYLE)
        assert result.center == (60, 35)
        assert set(result.vertices.values()) == {(10, 10), (110, 10), (110, 60), (10, 60)}

    def test_equilateral_sides(self):
        result = rasterize_shape(_canvas(), "equilateral_triangle", Rect(50, 50, 250, 250), STYLE)
        a, b, c = result.vertices.values()
        sides = [math.dist(a, b), math.dist(b, c), math.dist(c, a)]
        assert max(sides) - min(sides) <= 1

    def test_straight_line_endpoints(self):
        result = rasterize_shape(_canvas(), "straight_line", Rect(20, 30, 120, 90), STYLE)
        assert result.endpoints == {"start": (20, 30), "end": (120, 90)}

    def test_flipped_line_uses_other_diagonal(self):
        result = rasterize_shape(_canvas(), "straight_line", Rect(20, 30, 120, 90), STYLE, flipped=True)
        assert result.endpoints == {"start": (120, 30), "end": (20, 90)}
        assert result.bbox == Rect(20, 30, 120, 90)

    def test_extent_tracks_drawn_bbox(self):
        for name in ("star5", "heptagon", "arrow_line", "cloud_callout", "bent_arrow"):
            extent = shape_extent(name, Rect(101, 77, 231, 191), STYLE.stroke_width)
            bbox = rasterize_shape(_canvas(), name, Rect(101, 77, 231, 191), STYLE).bbox
            assert abs(extent.x1 - bbox.x1) <= 3 and abs(extent.x2 - bbox.x2) <= 3
            assert abs(extent.y1 - bbox.y1) <= 3 and abs(extent.y2 - bbox.y2) <= 3

    def test_fill_is_drawn(self):
        canvas = _canvas()
        result = rasterize_shape(canvas, "rectangle", Rect(10, 10, 110, 60), STYLE)
        assert canvas.getpixel((int(result.center.x), int(result.center.y))) == (200, 40, 40)

    def test_bbox_even(self):
        for name in SHAPES:
            result = rasterize_shape(_canvas(), name, Rect(101, 77, 230, 190), STYLE)
            assert result.bbox.width % 2 == 0 and result.bbox.height % 2 == 0, name

    def test_square_kinds_square_bbox(self):
        for name in SQUARE_KINDS:
            result = rasterize_shape(_canvas(), name, Rect(100, 60, 220, 180), STYLE)
            assert result.bbox.width == result.bbox.height, name

    def test_dashed_differs_from_solid(self):
        solid, dashed = _canvas(), _canvas()
        line_solid = Style(None, Rgb(0, 0, 0), 3, "solid")
        line_dashed = Style(None, Rgb(0, 0, 0), 3, "dashed")
        rasterize_shape(solid, "straight_line", Rect(20, 20, 300, 20), line_solid)
        rasterize_shape(dashed, "straight_line", Rect(20, 20, 300, 20), line_dashed)
        row_solid = [solid.getpixel((x, 20)) for x in range(20, 300)]
        row_dashed = [dashed.getpixel((x, 20)) for x in range(20, 300)]
        assert (255, 255, 255) not in row_solid
        assert (255, 255, 255) in row_dashed


class TestChrome:
    def test_box_points_midpoints(self):
        points = box_points(Rect(0, 0, 100, 100))
        assert points["top_center"] == (50, 0)
        assert points["left_center"] == (0, 50)
        assert points["bottom_right"] == (100, 100)
        assert len(points) == 8

    def test_heart_has_no_markers(self):
        canvas = _canvas()
        result = rasterize_shape(canvas, "heart", Rect(100, 80, 200, 180), STYLE)
        chrome = draw_chrome(canvas, result, "heart", random.Random(0))
        assert chrome.vertex_markers == []

    def test_markers_at_vertices(self):
        canvas = _canvas()
        result = rasterize_shape(canvas, "pentagon", Rect(100, 80, 200, 180), STYLE)
        chrome = draw_chrome(canvas, result, "pentagon", random.Random(0))
        assert chrome.vertex_markers == list(result.vertices.values())

    def test_line_control_points_are_endpoints(self):
        canvas = _canvas()
        result = rasterize_shape(canvas, "arrow_line", Rect(60, 60, 200, 160), STYLE)
        chrome = draw_chrome(canvas, result, "arrow_line", random.Random(0))
        assert chrome.box_points == result.endpoints

    def test_handle_geometry(self):
        canvas = _canvas()
        result = rasterize_shape(canvas, "rectangle", Rect(100, 100, 200, 200), STYLE)
        chrome = draw_chrome(canvas, result, "rectangle", random.Random(3))
        anchor = box_points(result.bbox)[chrome.rotation_anchor]
        nx, ny = ANCHOR_NORMALS[chrome.rotation_anchor]
        assert chrome.rotation_handle_center == (anchor.x + 29 * nx, anchor.y + 29 * ny)

    def test_all_anchors_occur(self):
        seen = Counter()
        canvas = _canvas()
        result = rasterize_shape(canvas, "rectangle", Rect(100, 100, 200, 200), STYLE)
        rng = random.Random(8)
        for _ in range(1000):
            seen[draw_chrome(canvas, result, "rectangle", rng).rotation_anchor] += 1
        assert set(seen) == set(ANCHOR_NORMALS)


class TestSampleScene:
    def test_deterministic(self):
        assert sample_scene(random.Random(5)) == sample_scene(random.Random(5))

    def test_ranges(self):
        rng = random.Random(0)
        counts = Counter()
        for _ in range(10_000):
            params = sample_scene(rng)
            assert 800 <= params.width <= 2560
            assert 600 <= params.height <= 1440
            counts[params.element_count] += 1
        assert set(counts) == {3, 4, 5, 6, 7, 8}

    def test_common_kinds_favored(self):
        kinds = Counter(k.name for k in sample_kinds(random.Random(1), 20_000))
        assert kinds["rectangle"] > kinds["hexagon"]


def _params(w=800, h=600, count=8, seed=0) -> SceneParams:
    return SceneParams(w, h, Rgb(250, 250, 250), count, seed)


class TestPlaceElements:
    def test_single_accepted(self):
        params = _params(count=1)
        [placement] = place_elements(params, [SHAPES["rectangle"]], random.Random(0))
        assert not placement.flagged
        assert placement.overlap == 0.0

    def test_unflagged_extents_below_threshold(self):
        rng = random.Random(4)
        for _ in range(50):
            params = sample_scene(rng)
            placements = place_elements(params, sample_kinds(rng, params.element_count), rng)
            for i, a in enumerate(placements):
                for b in placements[:i]:
                    if not a.flagged:
                        assert overlap_ratio(a.extent, b.extent) < OVERLAP_THRESHOLD

    def test_extent_matches_placement(self):
        rng = random.Random(8)
        params = _params(1280, 720)
        for placement in place_elements(params, sample_kinds(rng, 8), rng):
            expected = shape_extent(placement.kind, placement.box, 5, flipped=placement.flipped)
            assert placement.extent == expected

    def test_only_line_kinds_flip(self):
        seeds = range(200)
        assert not any(placement_flipped("rectangle", s) for s in seeds)
        flips = [placement_flipped("straight_line", s) for s in seeds]
        assert any(flips) and not all(flips)

    def test_flagged_keeps_minimum(self):
        rng = random.Random(9)
        params = _params()
        kinds = [SHAPES["square"]] * 8
        placements = place_elements(params, kinds, rng)
        for i, placement in enumerate(placements):
            if not placement.flagged:
                continue
            earlier = [p.extent for p in placements[:i]]
            overlaps = [
                max(overlap_ratio(shape_extent(placement.kind, box, 5), other) for other in earlier)
                for box in candidate_boxes(params, placement.kind, placement.sub_seed)
            ]
            assert placement.overlap == min(overlaps)
            assert placement.overlap >= OVERLAP_THRESHOLD

    def test_sizes_and_margins(self):
        rng = random.Random(2)
        params = _params(1280, 720)
        for name in ("circle", "straight_line", "heart"):
            kind = SHAPES[name]
            upper = 0.6 if name in LINE_KINDS else 0.4
            for box in candidate_boxes(params, kind, rng.getrandbits(64)):
                assert box.x1 >= CANVAS_MARGIN and box.x2 <= 1280 - CANVAS_MARGIN
                assert box.y1 >= CANVAS_MARGIN and box.y2 <= 720 - CANVAS_MARGIN
                assert 0.08 * 720 - 2 <= box.width <= upper * 720 + 2
                if kind.square:
                    assert box.width == box.height


class TestSampleStyle:
    def test_constraints(self):
        rng = random.Random(6)
        background = Rgb(240, 240, 230)
        dashed = 0
        n = 10_000
        for i in range(n):
            kind = "straight_line" if i % 10 == 0 else "rectangle"
            style, flagged = sample_style(rng, kind, background)
            assert 1 <= style.stroke_width <= 5
            dashed += style.line_style == "dashed"
            if flagged:
                continue
            if style.fill is None:
                assert redmean_distance(style.outline, background) >= 100
            else:
                assert redmean_distance(style.fill, background) >= 100
                assert redmean_distance(style.outline, style.fill) >= 60
        assert abs(dashed / n - 0.2) <= 0.02

    def test_line_kinds_have_no_fill(self):
        style, _ = sample_style(random.Random(0), "arc", Rgb(0, 0, 0))
        assert style.fill is None


class TestGenerateScene:
    def test_deterministic(self):
        a = generate_scene(7, 3)
        b = generate_scene(7, 3)
        assert json.dumps(emit_annotation(a)) == json.dumps(emit_annotation(b))
        assert a.image.tobytes() == b.image.tobytes()

    def test_ids_and_references_unique(self):
        scene = generate_scene(1, 0)
        assert scene.id == "canvas_000000"
        ids = [e.id for e in scene.elements]
        assert ids == [f"shape_{n:04d}" for n in range(1, len(ids) + 1)]
        refs = [e.reference for e in scene.elements]
        assert len(set(refs)) == len(refs)

    def test_invariants_over_scenes(self):
        for index in range(40):
            scene = generate_scene(11, index)
            w, h = scene.size
            assert 3 <= len(scene.elements) <= 8
            ann = scene_annotation(scene)
            for p in annotation_points(ann):
                assert 0 <= p.x <= w and 0 <= p.y <= h
            for e in scene.elements:
                if e.kind.square:
                    assert e.shape.bbox.width == e.shape.bbox.height

    def test_unflagged_scenes_keep_drawn_bboxes_apart(self):
        for index in (*range(40), 83, 139, 184, 297):
            scene = generate_scene(7, index)
            if scene.flagged:
                continue
            boxes = [e.shape.bbox for e in scene.elements]
            for i, a in enumerate(boxes):
                for b in boxes[:i]:
                    assert overlap_ratio(a, b) < OVERLAP_THRESHOLD

    def test_crowded_pairs(self):
        def shape(x1, y1, x2, y2):
            return ShapeResult(Rect(x1, y1, x2, y2), Point((x1 + x2) // 2, (y1 + y2) // 2), {}, {})

        shapes = [shape(0, 0, 100, 100), shape(300, 300, 400, 400), shape(50, 50, 150, 150)]
        assert crowded_pairs(shapes) == {0, 2}
        assert crowded_pairs(shapes[:2]) == set()

    @pytest.mark.slow
    def test_invariants_full_scale(self):
        for index in range(5000):
            scene = generate_scene(2024, index)
            w, h = scene.size
            for p in annotation_points(scene_annotation(scene)):
                assert 0 <= p.x <= w and 0 <= p.y <= h
            refs = [e.reference for e in scene.elements]
            assert len(set(refs)) == len(refs)


class TestAnnotation:
    def test_round_trip(self):
        scene = generate_scene(3, 1)
        doc = json.loads(json.dumps(emit_annotation(scene)))
        assert parse_annotation(doc) == scene_annotation(scene)

    def test_required_keys(self):
        scene = generate_scene(3, 2)
        doc = emit_annotation(scene)
        for element in doc["elements"]:
            for key in ("id", "shape_type", "reference", "bbox", "center_point", "box_points",
                        "rotation_handle_center", "styling"):  # fmt: skip
                assert key in element

    def test_center_is_bbox_midpoint(self):
        scene = generate_scene(3, 4)
        for element in emit_annotation(scene)["elements"]:
            x1, y1, x2, y2 = element["bbox"]
            assert element["center_point"] == [(x1 + x2) // 2, (y1 + y2) // 2]
            if "top_left" in element["box_points"]:
                assert element["box_points"]["top_left"] == [x1, y1]

    def test_line_fill_null(self):
        rng = random.Random(0)
        for index in range(60):
            doc = emit_annotation(generate_scene(rng.randint(0, 10**6), index))
            for element in doc["elements"]:
                if element["shape_type"] in LINE_KINDS:
                    assert element["styling"]["fill"] is None
                    assert set(element["box_points"]) == {"start", "end"}

    def test_missing_reference(self):
        scene = generate_scene(3, 5)
        scene.elements[0].reference = None
        with pytest.raises(AnnotationError):
            emit_annotation(scene)

    def test_malformed(self):
        with pytest.raises(AnnotationError):
            parse_annotation({"canvas": {"width": 10}})
