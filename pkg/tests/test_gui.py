"""Tests for GUI source loading and grid-balanced element sampling."""

from __future__ import annotations

import json
import random
from collections import Counter

import pytest

from actsynth.errors import AnnotationError
from actsynth.geometry import Point, Rect
from actsynth.gui import GuiElement, GuiScene, grid_cell, load_gui_source, normalize_point, sample_gui_elements

SIZE = (1000, 800)


def _scene() -> GuiScene:
    elements = []
    n = 0
    # three elements in each of the four top-left quadrant cells of a 4x4 grid, one icon each
    for row in range(2):
        for col in range(2):
            for j, kind in enumerate(("text", "icon", "text")):
                x, y = col * 250 + 20 + j * 60, row * 200 + 20
                elements.append(GuiElement(n, f"element {n}", Rect(x, y, x + 40, y + 30), kind))
                n += 1
    return GuiScene("gui_000000", "screen.png", SIZE, elements)


class TestLoad:
    def test_round_trip_fields(self, tmp_path):
        doc = {
            "screens": [
                {
                    "image": "home.png",
                    "size": [1000, 800],
                    "elements": [
                        {"element_id": 3, "description": "settings gear", "bbox": [900, 10, 940, 50], "kind": "icon"},
                        {"element_id": 4, "description": "Sign in", "bbox": [10, 10, 90, 40], "kind": "text"},
                    ],
                }
            ]
        }
        (tmp_path / "gui.json").write_text(json.dumps(doc))
        [scene] = load_gui_source(tmp_path / "gui.json")
        assert scene.image_ref == tmp_path / "home.png"
        assert scene.image_size == (1000, 800)
        assert scene.element(3).click_point == Point(920, 30)
        assert scene.element(4).kind == "text"

    @pytest.mark.parametrize(
        "element",
        [
            {"element_id": 1, "description": "x", "bbox": [10, 10, 5, 40], "kind": "icon"},
            {"element_id": 1, "description": "x", "bbox": [10, 10, 2000, 40], "kind": "icon"},
            {"element_id": 1, "description": "x", "bbox": [10, 10, 20, 40], "kind": "slider"},
            {"element_id": "1", "description": "x", "bbox": [10, 10, 20, 40], "kind": "icon"},
            {"description": "x", "bbox": [10, 10, 20, 40], "kind": "icon"},
        ],
    )
    def test_bad_element(self, tmp_path, element):
        doc = {"screens": [{"image": "a.png", "size": [1000, 800], "elements": [element]}]}
        (tmp_path / "gui.json").write_text(json.dumps(doc))
        with pytest.raises(AnnotationError):
            load_gui_source(tmp_path / "gui.json")

    def test_duplicate_ids(self, tmp_path):
        element = {"element_id": 1, "description": "x", "bbox": [10, 10, 20, 40], "kind": "icon"}
        doc = {"screens": [{"image": "a.png", "size": [100, 100], "elements": [element, element]}]}
        (tmp_path / "gui.json").write_text(json.dumps(doc))
        with pytest.raises(AnnotationError):
            load_gui_source(tmp_path / "gui.json")


class TestSample:
    def test_grid_cell(self):
        assert grid_cell(Point(0, 0), SIZE) == (0, 0)
        assert grid_cell(Point(999, 799), SIZE) == (3, 3)
        assert grid_cell(Point(1000, 800), SIZE) == (3, 3)
        assert grid_cell(Point(260, 10), SIZE) == (0, 1)

    def test_round_robin_icons_first(self):
        scene = _scene()
        picked = sample_gui_elements(scene, random.Random(0), k=4)
        assert [e.kind for e in picked] == ["icon"] * 4
        assert len({grid_cell(e.click_point, SIZE) for e in picked}) == 4

    def test_cells_balanced(self):
        picked = sample_gui_elements(_scene(), random.Random(1), k=10)
        per_cell = Counter(grid_cell(e.click_point, SIZE) for e in picked)
        assert sorted(per_cell.values()) == [2, 2, 3, 3]

    def test_no_repeats_and_cap(self):
        scene = _scene()
        picked = sample_gui_elements(scene, random.Random(2), k=50)
        assert len(picked) == len(scene.elements)
        assert len({e.element_id for e in picked}) == len(picked)

    def test_deterministic(self):
        a = sample_gui_elements(_scene(), random.Random(5))
        b = sample_gui_elements(_scene(), random.Random(5))
        assert a == b

    def test_empty_scene(self):
        assert sample_gui_elements(GuiScene("g", "s.png", SIZE), random.Random(0)) == []


class TestNormalize:
    def test_five_decimals(self):
        p = normalize_point(Point(333, 123), (1000, 700))
        assert p == (0.333, 0.17571)

    def test_clamped(self):
        assert normalize_point(Point(1200, -4), (1000, 700)) == (1.0, 0.0)
