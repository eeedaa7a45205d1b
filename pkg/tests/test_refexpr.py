"""Tests for palette lookup, region phrases and reference disambiguation."""

from __future__ import annotations

import random

from actsynth.canvas.chrome import ChromeAnnotation
from actsynth.canvas.scene import CanvasElement, generate_scene
from actsynth.canvas.shapes import SHAPES, ShapeResult, Style
from actsynth.geometry import Point, Rect, Rgb, redmean_distance
from actsynth.refexpr import (
    PaletteEntry,
    base_reference,
    disambiguate,
    load_palette,
    nearest_color_name,
    region_phrase,
)

SIZE = (900, 900)


def _element(
    element_id: str,
    kind: str = "circle",
    box: tuple[int, int, int, int] = (100, 100, 200, 200),
    fill: Rgb | None = Rgb(255, 0, 0),
    outline: Rgb = Rgb(0, 0, 255),
    line_style: str = "solid",
) -> CanvasElement:
    bbox = Rect(*box)
    center = Point((bbox.x1 + bbox.x2) // 2, (bbox.y1 + bbox.y2) // 2)
    return CanvasElement(
        id=element_id,
        kind=SHAPES[kind],
        style=Style(fill, outline, 2, line_style),
        shape=ShapeResult(bbox=bbox, center=center, vertices={}, endpoints={}),
        chrome=ChromeAnnotation(box_points={}),
    )


class TestPalette:
    def test_bundled(self):
        palette = load_palette()
        assert len(palette) == 44
        assert len({e.name for e in palette}) == 44
        named = {e.name: e.rgb for e in palette}
        assert named["red"] == (255, 0, 0)
        assert named["blue"] == (0, 0, 255)

    def test_exact_hit(self):
        assert nearest_color_name(Rgb(255, 0, 0)) == "red"

    def test_near_hit(self):
        assert nearest_color_name(Rgb(254, 1, 0)) == "red"

    def test_tie_goes_to_earlier(self):
        palette = [PaletteEntry("first", Rgb(0, 0, 0)), PaletteEntry("second", Rgb(0, 0, 0))]
        assert nearest_color_name(Rgb(10, 10, 10), palette) == "first"

    def test_brute_force(self):
        palette = load_palette()
        rng = random.Random(0)
        for _ in range(1000):
            c = Rgb(rng.randint(0, 255), rng.randint(0, 255), rng.randint(0, 255))
            name = nearest_color_name(c)
            chosen = next(e for e in palette if e.name == name)
            assert all(redmean_distance(c, chosen.rgb) <= redmean_distance(c, e.rgb) for e in palette)


class TestRegionPhrase:
    def test_upper_left(self):
        assert region_phrase(Point(90, 60), (900, 600)) == "upper-left area of the canvas"

    def test_center(self):
        assert region_phrase(Point(450, 300), (900, 600)) == "center area of the canvas"

    def test_center_right(self):
        assert region_phrase(Point(800, 300), (900, 600)) == "center-right area of the canvas"

    def test_boundary_floor(self):
        assert region_phrase(Point(300, 0), (900, 600)) == "upper-center area of the canvas"
        assert region_phrase(Point(299, 0), (900, 600)) == "upper-left area of the canvas"

    def test_far_edge_clamped(self):
        assert region_phrase(Point(900, 600), (900, 600)) == "lower-right area of the canvas"

    def test_fine_grid(self):
        assert region_phrase(Point(10, 10), (900, 600), grid=5) == "top far-left part of the canvas"
        assert region_phrase(Point(450, 300), (900, 600), grid=5) == "middle center part of the canvas"

    def test_fine_grid_has_25_phrases(self):
        phrases = {
            region_phrase(Point(x * 100 + 50, y * 100 + 50), (500, 500), grid=5) for x in range(5) for y in range(5)
        }
        assert len(phrases) == 25


class TestBaseReference:
    def test_template(self):
        element = _element("a", "rounded_square", (700, 400, 800, 500), Rgb(64, 64, 64), Rgb(210, 180, 140))
        assert base_reference(element, SIZE) == (
            "dark gray-filled rounded square with tan outline in the center-right area of the canvas"
        )

    def test_line_like(self):
        element = _element("a", "straight_line", (100, 100, 200, 200), None, Rgb(255, 0, 0))
        assert base_reference(element, SIZE) == "red straight line in the upper-left area of the canvas"

    def test_borderless(self):
        element = _element("a", "borderless_textbox", (100, 100, 200, 200))
        assert base_reference(element, SIZE) == "red-filled borderless text box in the upper-left area of the canvas"

    def test_identical_elements_share_base(self):
        assert base_reference(_element("a"), SIZE) == base_reference(_element("b"), SIZE)


class TestDisambiguate:
    def test_singleton_unchanged(self):
        element = _element("a")
        assert disambiguate([element], SIZE) == {"a": base_reference(element, SIZE)}

    def test_size_pair(self):
        big = _element("a", box=(20, 20, 100, 70))  # 4,000 px^2
        small = _element("b", box=(120, 120, 160, 145))  # 1,000 px^2
        refs = disambiguate([big, small], SIZE)
        assert refs["a"].startswith("the larger ")
        assert refs["b"].startswith("the smaller ")

    def test_largest_of_three(self):
        elements = [
            _element("a", box=(10, 10, 110, 110)),
            _element("b", box=(150, 20, 190, 60)),
            _element("c", box=(200, 100, 240, 140)),
        ]
        refs = disambiguate(elements, SIZE)
        assert refs["a"].startswith("the largest ")
        assert len(set(refs.values())) == 3

    def test_cascade_dash_then_ordinal(self):
        elements = [
            _element("a", box=(10, 10, 50, 50)),
            _element("b", box=(60, 60, 100, 100), line_style="dashed"),
            _element("c", box=(110, 110, 150, 150)),
        ]
        refs = disambiguate(elements, SIZE)
        assert refs["b"] == "red-filled circle with blue dashed outline in the upper-left area of the canvas"
        assert refs["a"] == "the upper red-filled circle with blue solid outline in the upper-left area of the canvas"
        assert refs["c"] == "the lower red-filled circle with blue solid outline in the upper-left area of the canvas"

    def test_fine_region_resolves(self):
        elements = [_element("a", box=(10, 10, 50, 50)), _element("b", box=(230, 230, 270, 270))]
        refs = disambiguate(elements, SIZE)
        assert refs["a"].endswith("top far-left part of the canvas")
        assert refs["b"].endswith("upper left part of the canvas")

    def test_order_independent(self):
        elements = [_element(str(i), box=(10 + 10 * i, 10, 50 + 10 * i, 50)) for i in range(5)]
        shuffled = elements[:]
        random.Random(1).shuffle(shuffled)
        assert disambiguate(elements, SIZE) == disambiguate(shuffled, SIZE)

    def test_scenes_unique(self):
        for index in range(100):
            scene = generate_scene(99, index)
            refs = [e.reference for e in scene.elements]
            assert len(set(refs)) == len(refs)
