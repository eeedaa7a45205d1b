"""Tests for table topology, masking, layout and cell-geometry helpers."""

from __future__ import annotations

import random

import pytest

from actsynth.errors import TableError
from actsynth.geometry import Rect
from actsynth.table_synth import (
    TABLE_PRESETS,
    CellAnnotation,
    check_tiling,
    corner_fill_target,
    edge_handle,
    evolve_table,
    excel_name,
    generate_table,
    layout_render,
    load_seed_tables,
    mask_cells,
    maybe_mask,
    merge_cells,
    parse_excel_name,
    table_from_dict,
)

STYLE = TABLE_PRESETS[0]


def _grid(rows: int, cols: int, header_rows: int = 1) -> dict:
    return {"rows": [[f"r{r}c{c}" for c in range(cols)] for r in range(rows)], "header_rows": header_rows}


def _cell(x1, y1, x2, y2) -> CellAnnotation:
    return CellAnnotation(Rect(x1, y1, x2, y2), 0, 0, "", "", "", "A1")


class TestTiling:
    def test_seed_tables_valid(self):
        seeds = load_seed_tables()
        assert len(seeds) >= 5
        for model in seeds:
            assert check_tiling(model) == []

    def test_overlap_detected(self):
        model = table_from_dict(_grid(3, 3))
        model.cells[(0, 0)] = model.cells[(0, 0)].__class__("x", 1, 2)
        assert any("covered by both" in e for e in check_tiling(model))

    def test_gap_detected(self):
        model = table_from_dict(_grid(2, 2))
        del model.cells[(1, 1)]
        assert any("uncovered" in e for e in check_tiling(model))

    def test_bad_merge_rejected_at_load(self):
        data = _grid(2, 2)
        data["merges"] = [[1, 1, 1, 2]]
        with pytest.raises(TableError):
            table_from_dict(data)


class TestEvolve:
    def test_zero_variants(self):
        assert evolve_table(table_from_dict(_grid(3, 3)), random.Random(0), 0) == []

    def test_merge_absorbs_neighbor(self):
        model = table_from_dict(_grid(3, 3, header_rows=0))
        merged = merge_cells(model, 0, 0, 1, 2)
        assert merged is not None
        assert (0, 1) not in merged.cells
        assert merged.cells[(0, 0)].col_span == 2
        assert check_tiling(merged) == []

    def test_merge_over_span_refused(self):
        model = merge_cells(table_from_dict(_grid(3, 3, header_rows=0)), 0, 0, 1, 2)
        assert merge_cells(model, 0, 1, 2, 1) is None

    def test_variants_valid(self):
        rng = random.Random(3)
        for seed in load_seed_tables():
            for variant in evolve_table(seed, rng, 10):
                assert check_tiling(variant) == []
                assert variant.header_rows == seed.header_rows

    def test_deterministic(self):
        seed = load_seed_tables()[0]
        a = evolve_table(seed, random.Random(5), 4)
        b = evolve_table(seed, random.Random(5), 4)
        assert a == b


class TestMask:
    def test_zero_fraction(self):
        model = table_from_dict(_grid(5, 5))
        assert mask_cells(model, random.Random(0), 0.0) == model

    def test_full_fraction(self):
        model = table_from_dict(_grid(5, 5))
        masked = mask_cells(model, random.Random(0), 1.0)
        for (r, c), cell in masked.cells.items():
            assert (cell.content == "") == (r >= 1)

    def test_default_fraction_count(self):
        model = table_from_dict(_grid(11, 10))
        masked = mask_cells(model, random.Random(42), 0.6)
        emptied = sum(1 for (r, _), cell in masked.cells.items() if r >= 1 and not cell.content)
        assert 45 <= emptied <= 75

    def test_fraction_range(self):
        with pytest.raises(TableError):
            mask_cells(table_from_dict(_grid(2, 2)), random.Random(0), 1.5)

    def test_half_of_tables_masked(self):
        rng = random.Random(1)
        model = table_from_dict(_grid(3, 3))
        masked = sum(maybe_mask(model, rng)[1] for _ in range(2000))
        assert 900 <= masked <= 1100

    def test_masking_keeps_geometry(self):
        model = table_from_dict(_grid(4, 4))
        masked = mask_cells(model, random.Random(2), 0.9)
        full = layout_render(model, STYLE)
        partial = layout_render(masked, STYLE, measure_model=model)
        assert {k: c.bbox for k, c in full.cells.items()} == {k: c.bbox for k, c in partial.cells.items()}
        assert full.image.size == partial.image.size


class TestLayout:
    def test_single_cell(self):
        rendered = layout_render(table_from_dict({"rows": [["x"]], "header_rows": 0}), STYLE)
        w, h = rendered.image.size
        assert rendered.cells[(0, 0)].bbox == Rect(16, 16, w - 16, h - 16)

    def test_col_span_width(self):
        data = {"rows": [["wide header", ""], ["a", "b"]], "header_rows": 1, "merges": [[0, 0, 1, 2]]}
        rendered = layout_render(table_from_dict(data), STYLE)
        top = rendered.cells[(0, 0)].bbox
        assert top.width == rendered.cells[(1, 0)].bbox.width + rendered.cells[(1, 1)].bbox.width

    def test_cells_tile_content_box(self):
        for seed in load_seed_tables():
            rendered = layout_render(seed, STYLE)
            boxes = [c.bbox for c in rendered.cells.values()]
            assert sum(b.area for b in boxes) == rendered.content_box.area
            for i, a in enumerate(boxes):
                for b in boxes[:i]:
                    assert min(a.x2, b.x2) <= max(a.x1, b.x1) or min(a.y2, b.y2) <= max(a.y1, b.y1)

    def test_headers_and_names(self):
        seed = next(s for s in load_seed_tables() if s.name == "quarterly_sales")
        rendered = layout_render(seed, STYLE)
        cell = rendered.cells[(2, 3)]
        assert cell.row_header == "South"
        assert cell.col_header == "Q3"
        assert cell.excel_name == "D3"

    def test_clipping_flags(self):
        model = table_from_dict(_grid(60, 12))
        rendered = layout_render(model, STYLE, target_size=(300, 200))
        assert rendered.clipped
        w, h = rendered.image.size
        assert (w, h) == (300, 200)
        for cell in rendered.cells.values():
            assert cell.bbox.within(w, h)

    def test_deterministic_render(self):
        a = generate_table(7, 0)
        b = generate_table(7, 0)
        assert a.image.tobytes() == b.image.tobytes()
        assert a.rendered.cells == b.rendered.cells


class TestExcelNames:
    def test_examples(self):
        assert excel_name(10, 7) == "H11"
        assert excel_name(0, 0) == "A1"
        assert excel_name(0, 26) == "AA1"
        assert parse_excel_name("H11") == (10, 7)

    def test_round_trip(self):
        for r in range(0, 200, 7):
            for c in range(0, 800, 13):
                assert parse_excel_name(excel_name(r, c)) == (r, c)

    def test_invalid(self):
        with pytest.raises(TableError):
            parse_excel_name("11H")


class TestCellHelpers:
    def test_edge_handle(self):
        assert edge_handle(_cell(100, 50, 200, 80)) == (200, 65)
        assert edge_handle(_cell(0, 0, 10, 10)) == (10, 5)

    def test_corner_fill(self):
        target = corner_fill_target(_cell(100, 50, 200, 80))
        assert target.rect == Rect(100, 80, 200, 110)
        assert not target.clipped

    def test_corner_fill_twice(self):
        first = corner_fill_target(_cell(100, 50, 200, 80)).rect
        second = corner_fill_target(CellAnnotation(first, 0, 0, "", "", "", "A1")).rect
        assert second == Rect(100, 110, 200, 140)

    def test_corner_fill_clipped(self):
        target = corner_fill_target(_cell(100, 50, 200, 80), image_size=(300, 100))
        assert target.clipped
        assert target.rect == Rect(100, 80, 200, 100)

    def test_formulas_random(self):
        rng = random.Random(0)
        for _ in range(500):
            x1, y1 = rng.randint(0, 500), rng.randint(0, 500)
            x2, y2 = x1 + rng.randint(1, 200), y1 + rng.randint(1, 200)
            cell = _cell(x1, y1, x2, y2)
            assert edge_handle(cell) == (x2, (y1 + y2) / 2)
            assert corner_fill_target(cell).rect == Rect(x1, y2, x2, 2 * y2 - y1)


class TestPresets:
    def test_count_and_distinct(self):
        assert len(TABLE_PRESETS) == 50
        assert len({(p.family, p.border, p.stripe) for p in TABLE_PRESETS}) == 50
