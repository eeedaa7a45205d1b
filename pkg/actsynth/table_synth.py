"""Table synthesis: topology evolution, cell masking, styled grid rendering and cell geometry."""

from __future__ import annotations

import logging
import random
import re
from collections.abc import Callable
from dataclasses import dataclass, replace
from importlib import resources
from typing import Any, Literal, NamedTuple

import yaml
from PIL import Image, ImageDraw

from actsynth.errors import TableError
from actsynth.fonts import Font, line_height, load_font
from actsynth.geometry import Point, Rect, Rgb

logger = logging.getLogger(__name__)

BorderMode = Literal["none", "all", "outer"]
MutationName = Literal["merge", "add_row", "add_col", "split", "shuffle_cols"]

MUTATIONS: tuple[MutationName, ...] = ("merge", "add_row", "add_col", "split", "shuffle_cols")
MUTATION_RETRIES = 5
MASK_FRACTION = 0.6
MASK_PROBABILITY = 0.5
PRESET_COUNT = 50
BORDER_MODES: tuple[BorderMode, ...] = ("all", "outer", "none")
MARGIN = 16
MIN_COL_WIDTH = 40
MIN_FONT_SIZE = 8
DEFAULT_TARGET = (1920, 1080)
FONT_RANGE = (12, 20)
PADDING_RANGE = (4, 12)
COLOR_JITTER = 12
_A1_RE = re.compile(r"^([A-Z]+)([1-9][0-9]*)$")


@dataclass(frozen=True)
class Cell:
    content: str = ""
    row_span: int = 1
    col_span: int = 1


@dataclass
class TableModel:
    """Grid of anchor cells; a merged cell is stored once, at its top-left anchor."""

    rows: int
    cols: int
    cells: dict[tuple[int, int], Cell]
    header_rows: int = 1
    header_cols: int = 0
    name: str = ""

    def copy(self) -> TableModel:
        return replace(self, cells=dict(self.cells))

    def owner(self) -> dict[tuple[int, int], tuple[int, int]]:
        """Map every grid position to the anchor covering it."""
        owners = {}
        for (r, c), cell in self.cells.items():
            for dr in range(cell.row_span):
                for dc in range(cell.col_span):
                    owners[(r + dr, c + dc)] = (r, c)
        return owners

    def is_header(self, r: int, c: int) -> bool:
        return r < self.header_rows or c < self.header_cols

    def validate(self) -> None:
        errors = check_tiling(self)
        if errors:
            raise TableError(f"Table {self.name or '<unnamed>'}: " + "; ".join(errors))


def check_tiling(model: TableModel) -> list[str]:
    """Return tiling violations; an empty list means the spans cover the grid exactly once."""
    errors = []
    if model.rows < 1 or model.cols < 1:
        errors.append(f"grid must be at least 1x1, got {model.rows}x{model.cols}")
    seen: dict[tuple[int, int], tuple[int, int]] = {}
    for (r, c), cell in sorted(model.cells.items()):
        if cell.row_span < 1 or cell.col_span < 1:
            errors.append(f"cell ({r},{c}) has non-positive span")
            continue
        if r + cell.row_span > model.rows or c + cell.col_span > model.cols:
            errors.append(f"cell ({r},{c}) span leaves the grid")
        for dr in range(cell.row_span):
            for dc in range(cell.col_span):
                pos = (r + dr, c + dc)
                if pos in seen:
                    errors.append(f"position {pos} covered by both {seen[pos]} and ({r},{c})")
                seen[pos] = (r, c)
    missing = [(r, c) for r in range(model.rows) for c in range(model.cols) if (r, c) not in seen]
    if missing:
        errors.append(f"uncovered positions: {missing[:5]}")
    return errors


def table_from_dict(data: dict[str, Any]) -> TableModel:
    rows = data["rows"]
    n_rows, n_cols = len(rows), max(len(r) for r in rows)
    cells = {(r, c): Cell(str(rows[r][c]) if c < len(rows[r]) else "") for r in range(n_rows) for c in range(n_cols)}
    for r, c, rs, cs in data.get("merges", []):
        for dr in range(rs):
            for dc in range(cs):
                if (dr, dc) != (0, 0):
                    cells.pop((r + dr, c + dc), None)
        cells[(r, c)] = Cell(cells[(r, c)].content, rs, cs)
    model = TableModel(
        rows=n_rows,
        cols=n_cols,
        cells=cells,
        header_rows=data.get("header_rows", 1),
        header_cols=data.get("header_cols", 0),
        name=data.get("name", ""),
    )
    model.validate()
    return model


def load_seed_tables() -> list[TableModel]:
    """The bundled seed tables."""
    text = (resources.files("actsynth") / "data" / "seed_tables.yaml").read_text(encoding="utf-8")
    return [table_from_dict(d) for d in yaml.safe_load(text) or []]


# -- topology mutations: each returns a new model, or None when it does not apply


def merge_cells(model: TableModel, r: int, c: int, row_span: int, col_span: int) -> TableModel | None:
    """Merge a block of unmerged cells into one anchored at (r, c); None if the block is not free."""
    if r + row_span > model.rows or c + col_span > model.cols:
        return None
    block = [(r + dr, c + dc) for dr in range(row_span) for dc in range(col_span)]
    for pos in block:
        cell = model.cells.get(pos)
        if cell is None or cell.row_span > 1 or cell.col_span > 1:
            return None
    out = model.copy()
    for pos in block[1:]:
        del out.cells[pos]
    out.cells[(r, c)] = Cell(model.cells[(r, c)].content, row_span, col_span)
    return out


def _merge(model: TableModel, rng: random.Random) -> TableModel | None:
    if model.rows <= model.header_rows or model.cols <= model.header_cols:
        return None
    rs, cs = rng.choice([(1, 2), (2, 1), (2, 2)])
    r = rng.randint(model.header_rows, model.rows - 1)
    c = rng.randint(model.header_cols, model.cols - 1)
    return merge_cells(model, r, c, rs, cs)


def _column_values(model: TableModel, c: int) -> list[str]:
    return [
        cell.content for (r, cc), cell in model.cells.items() if cc == c and r >= model.header_rows and cell.content
    ]


def _add_row(model: TableModel, rng: random.Random) -> TableModel | None:
    at = rng.randint(model.header_rows, model.rows)
    cells: dict[tuple[int, int], Cell] = {}
    stretched = set()
    for (r, c), cell in model.cells.items():
        if r >= at:
            cells[(r + 1, c)] = cell
        elif r + cell.row_span > at:
            cells[(r, c)] = replace(cell, row_span=cell.row_span + 1)
            stretched.update(range(c, c + cell.col_span))
        else:
            cells[(r, c)] = cell
    for c in range(model.cols):
        if c in stretched:
            continue
        values = _column_values(model, c)
        cells[(at, c)] = Cell(rng.choice(values) if values else "")
    return replace(model, rows=model.rows + 1, cells=cells)


def _add_col(model: TableModel, rng: random.Random) -> TableModel | None:
    at = rng.randint(model.header_cols, model.cols)
    source = rng.randrange(model.header_cols, model.cols) if model.cols > model.header_cols else None
    values = _column_values(model, source) if source is not None else []
    cells: dict[tuple[int, int], Cell] = {}
    stretched = set()
    for (r, c), cell in model.cells.items():
        if c >= at:
            cells[(r, c + 1)] = cell
        elif c + cell.col_span > at:
            cells[(r, c)] = replace(cell, col_span=cell.col_span + 1)
            stretched.update(range(r, r + cell.row_span))
        else:
            cells[(r, c)] = cell
    for r in range(model.rows):
        if r in stretched:
            continue
        if r < model.header_rows:
            content = f"Column {at + 1}" if r == model.header_rows - 1 else ""
        else:
            content = rng.choice(values) if values else ""
        cells[(r, at)] = Cell(content)
    return replace(model, cols=model.cols + 1, cells=cells)


def _split(model: TableModel, rng: random.Random) -> TableModel | None:
    merged = sorted(pos for pos, cell in model.cells.items() if cell.row_span > 1 or cell.col_span > 1)
    if not merged:
        return None
    r, c = rng.choice(merged)
    cell = model.cells[(r, c)]
    out = model.copy()
    for dr in range(cell.row_span):
        for dc in range(cell.col_span):
            out.cells[(r + dr, c + dc)] = Cell("")
    out.cells[(r, c)] = Cell(cell.content)
    return out


def _shuffle_cols(model: TableModel, rng: random.Random) -> TableModel | None:
    body = list(range(model.header_cols, model.cols))
    if len(body) < 2:
        return None
    if any(cell.col_span > 1 and c + cell.col_span > model.header_cols for (_, c), cell in model.cells.items()):
        return None
    order = body[:]
    rng.shuffle(order)
    if order == body:
        return None
    moved = dict(zip(order, body, strict=True))
    cells = {(r, moved.get(c, c)): cell for (r, c), cell in model.cells.items()}
    return replace(model, cells=cells)


MUTATORS: dict[MutationName, Callable[[TableModel, random.Random], TableModel | None]] = {
    "merge": _merge,
    "add_row": _add_row,
    "add_col": _add_col,
    "split": _split,
    "shuffle_cols": _shuffle_cols,
}


def mutate(model: TableModel, rng: random.Random) -> TableModel:
    """Apply one randomly drawn mutation, redrawing up to MUTATION_RETRIES times."""
    for _ in range(MUTATION_RETRIES):
        name = rng.choice(MUTATIONS)
        out = MUTATORS[name](model, rng)
        if out is not None and not check_tiling(out):
            return out
    logger.debug("no applicable mutation for table %s after %d draws", model.name, MUTATION_RETRIES)
    return model


def evolve_table(seed_model: TableModel, rng: random.Random, n_variants: int) -> list[TableModel]:
    """Derive ``n_variants`` tables, each 1-3 topology mutations away from the seed."""
    seed_model.validate()
    variants = []
    for _ in range(n_variants):
        model = seed_model.copy()
        for _ in range(rng.randint(1, 3)):
            model = mutate(model, rng)
        variants.append(model)
    return variants


def mask_cells(model: TableModel, rng: random.Random, fraction: float = MASK_FRACTION) -> TableModel:
    """Empty each non-header cell independently with probability ``fraction``."""
    if not 0.0 <= fraction <= 1.0:
        raise TableError(f"mask fraction must be in [0, 1], got {fraction}")
    out = model.copy()
    for (r, c), cell in sorted(model.cells.items()):
        if model.is_header(r, c):
            continue
        if rng.random() < fraction:
            out.cells[(r, c)] = replace(cell, content="")
    return out


def maybe_mask(
    model: TableModel, rng: random.Random, fraction: float = MASK_FRACTION, probability: float = MASK_PROBABILITY
) -> tuple[TableModel, bool]:
    """Mask a random share of tables; returns the model and whether it was masked."""
    if rng.random() < probability:
        return mask_cells(model, rng, fraction), True
    return model, False


# -- styles


@dataclass(frozen=True)
class TableStyle:
    template_id: int
    family: str
    border: BorderMode
    stripe: bool
    header_bg: Rgb
    header_fg: Rgb
    body_bg: Rgb
    body_fg: Rgb
    grid: Rgb
    stripe_bg: Rgb
    font_size: int = 14
    padding: int = 6
    header_bold: bool = True


COLOR_KEYS = ("header_bg", "header_fg", "body_bg", "body_fg", "grid", "stripe_bg")


def _load_presets() -> list[TableStyle]:
    text = (resources.files("actsynth") / "data" / "table_styles.yaml").read_text(encoding="utf-8")
    presets = []
    for family in yaml.safe_load(text):
        colors = {k: Rgb.parse(family[k]) for k in COLOR_KEYS}
        for border in BORDER_MODES:
            for stripe in (False, True):
                presets.append(TableStyle(len(presets), family["name"], border, stripe, **colors))
    return presets[:PRESET_COUNT]


TABLE_PRESETS: list[TableStyle] = _load_presets()


def _jitter(c: Rgb, rng: random.Random) -> Rgb:
    return Rgb(*(min(255, max(0, v + rng.randint(-COLOR_JITTER, COLOR_JITTER))) for v in c))


def sample_table_style(rng: random.Random) -> TableStyle:
    """A preset with randomized metrics, header weight and slightly jittered colors."""
    preset = rng.choice(TABLE_PRESETS)
    return replace(
        preset,
        font_size=rng.randint(*FONT_RANGE),
        padding=rng.randint(*PADDING_RANGE),
        header_bold=rng.random() < 0.7,
        header_bg=_jitter(preset.header_bg, rng),
        body_bg=_jitter(preset.body_bg, rng),
        stripe_bg=_jitter(preset.stripe_bg, rng),
    )


# -- rendering


def excel_name(row: int, col: int) -> str:
    """A1-style name for a zero-based (row, col)."""
    letters = ""
    n = col + 1
    while n:
        n, rem = divmod(n - 1, 26)
        letters = chr(ord("A") + rem) + letters
    return f"{letters}{row + 1}"


def parse_excel_name(name: str) -> tuple[int, int]:
    m = _A1_RE.match(name.strip().upper())
    if not m:
        raise TableError(f"Not an A1 cell name: {name!r}")
    col = 0
    for ch in m.group(1):
        col = col * 26 + (ord(ch) - ord("A") + 1)
    return int(m.group(2)) - 1, col - 1


@dataclass
class CellAnnotation:
    bbox: Rect
    row: int
    col: int
    row_header: str
    col_header: str
    content: str
    excel_name: str
    row_span: int = 1
    col_span: int = 1


@dataclass
class RenderedTable:
    image: Image.Image
    cells: dict[tuple[int, int], CellAnnotation]
    font_size: int
    clipped: bool = False
    content_box: Rect | None = None


class _Layout(NamedTuple):
    xs: list[int]
    ys: list[int]
    font: Font
    font_size: int


def _measure(model: TableModel, style: TableStyle, font_size: int, font_path: str | None) -> _Layout:
    font = load_font(font_size, font_path)
    pad = style.padding
    widths = [MIN_COL_WIDTH] * model.cols
    for (_, c), cell in model.cells.items():
        if cell.col_span == 1:
            widths[c] = max(widths[c], int(font.getlength(cell.content)) + 2 * pad)
    # spanning cells widen their last column when the span is too narrow
    for (_, c), cell in sorted(model.cells.items()):
        if cell.col_span > 1:
            need = int(font.getlength(cell.content)) + 2 * pad
            have = sum(widths[c : c + cell.col_span])
            if need > have:
                widths[c + cell.col_span - 1] += need - have
    row_h = line_height(font) + 2 * pad
    xs = [MARGIN]
    for w in widths:
        xs.append(xs[-1] + w)
    ys = [MARGIN + r * row_h for r in range(model.rows + 1)]
    return _Layout(xs, ys, font, font_size)


def _headers(model: TableModel, owners: dict[tuple[int, int], tuple[int, int]], r: int, c: int) -> tuple[str, str]:
    row_header = ""
    col_header = ""
    body = r >= model.header_rows and c >= model.header_cols
    if body and model.header_cols:
        row_header = model.cells[owners[(r, model.header_cols - 1)]].content
    if body and model.header_rows:
        col_header = model.cells[owners[(model.header_rows - 1, c)]].content
    return row_header, col_header


def layout_render(
    model: TableModel,
    style: TableStyle,
    target_size: tuple[int, int] = DEFAULT_TARGET,
    font_path: str | None = None,
    measure_model: TableModel | None = None,
) -> RenderedTable:
    """Lay the grid out natively and draw it.

    Column widths come from the widest single-column content; all rows share one
    height. A table larger than ``target_size`` is re-measured once with a scaled
    font, and clipped (flagged) if it still does not fit. Passing the unmasked
    table as ``measure_model`` keeps a masked table's geometry identical to it.
    """
    model.validate()
    measured = measure_model if measure_model is not None else model
    if measured.owner() != model.owner():
        raise TableError("measure_model must share the table's topology")
    layout = _measure(measured, style, style.font_size, font_path)
    width, height = layout.xs[-1] + MARGIN, layout.ys[-1] + MARGIN
    tw, th = target_size
    if width > tw or height > th:
        scale = min(tw / width, th / height)
        smaller = max(MIN_FONT_SIZE, int(style.font_size * scale))
        logger.debug("table %s too large (%dx%d); font %d -> %d", model.name, width, height, style.font_size, smaller)
        layout = _measure(measured, style, smaller, font_path)
        width, height = layout.xs[-1] + MARGIN, layout.ys[-1] + MARGIN
    clipped = width > tw or height > th
    if clipped:
        logger.debug("table %s clipped to %dx%d", model.name, tw, th)
        width, height = min(width, tw), min(height, th)

    image = Image.new("RGB", (width, height), tuple(style.body_bg))
    draw = ImageDraw.Draw(image)
    owners = model.owner()
    text_h = line_height(layout.font)
    cells: dict[tuple[int, int], CellAnnotation] = {}
    for (r, c), cell in sorted(model.cells.items()):
        box = Rect(layout.xs[c], layout.ys[r], layout.xs[c + cell.col_span], layout.ys[r + cell.row_span])
        header = model.is_header(r, c)
        if header:
            bg, fg = style.header_bg, style.header_fg
        elif style.stripe and (r - model.header_rows) % 2 == 1:
            bg, fg = style.stripe_bg, style.body_fg
        else:
            bg, fg = style.body_bg, style.body_fg
        draw.rectangle([box.x1, box.y1, box.x2, box.y2], fill=tuple(bg))
        if style.border == "all":
            draw.rectangle([box.x1, box.y1, box.x2, box.y2], outline=tuple(style.grid), width=1)
        if cell.content:
            tx = box.x1 + style.padding
            ty = box.y1 + (box.height - text_h) // 2
            draw.text((tx, ty), cell.content, fill=tuple(fg), font=layout.font)
            if header and style.header_bold:
                draw.text((tx + 1, ty), cell.content, fill=tuple(fg), font=layout.font)

        if box.x1 >= width or box.y1 >= height:
            continue
        row_header, col_header = _headers(model, owners, r, c)
        cells[(r, c)] = CellAnnotation(
            bbox=box.clip(width, height) if clipped else box,
            row=r,
            col=c,
            row_header=row_header,
            col_header=col_header,
            content=cell.content,
            excel_name=excel_name(r, c),
            row_span=cell.row_span,
            col_span=cell.col_span,
        )

    content_box = Rect(layout.xs[0], layout.ys[0], layout.xs[-1], layout.ys[-1])
    if style.border in ("all", "outer"):
        draw.rectangle(content_box.as_list(), outline=tuple(style.grid), width=1)
    return RenderedTable(image, cells, layout.font_size, clipped, content_box.clip(width, height))


def edge_handle(cell: CellAnnotation) -> Point:
    """Right-edge midpoint, where a column-resize drag starts."""
    b = cell.bbox
    return Point(b.x2, (b.y1 + b.y2) / 2)


class FillTarget(NamedTuple):
    rect: Rect
    clipped: bool


def corner_fill_target(cell: CellAnnotation, image_size: tuple[int, int] | None = None) -> FillTarget:
    """The cell one row below, assuming uniform row heights."""
    b = cell.bbox
    rect = Rect(b.x1, b.y2, b.x2, 2 * b.y2 - b.y1)
    if image_size is not None and not rect.within(*image_size):
        return FillTarget(rect.clip(*image_size), True)
    return FillTarget(rect, False)


# -- scenes


@dataclass
class TableScene:
    id: str
    model: TableModel
    style: TableStyle
    rendered: RenderedTable
    masked: bool = False
    seed_name: str = ""

    @property
    def image(self) -> Image.Image:
        return self.rendered.image


def generate_table(
    global_seed: int | str,
    index: int,
    seeds: list[TableModel] | None = None,
    target_size: tuple[int, int] = DEFAULT_TARGET,
) -> TableScene:
    """One evolved, styled and possibly masked table; a pure function of its arguments."""
    rng = random.Random(f"{global_seed}/table/{index}")
    pool = seeds if seeds is not None else load_seed_tables()
    if not pool:
        raise TableError("No seed tables available")
    seed = rng.choice(pool)
    [full] = evolve_table(seed, rng, 1)
    model, masked = maybe_mask(full, rng)
    style = sample_table_style(rng)
    rendered = layout_render(model, style, target_size, measure_model=full)
    return TableScene(f"table_{index:06d}", model, style, rendered, masked, seed.name)


def cell_to_dict(cell: CellAnnotation) -> dict[str, Any]:
    return {
        "bbox": [int(v) for v in cell.bbox.as_list()],
        "row": cell.row,
        "col": cell.col,
        "row_header": cell.row_header,
        "col_header": cell.col_header,
        "content": cell.content,
        "excel_name": cell.excel_name,
        "row_span": cell.row_span,
        "col_span": cell.col_span,
    }


def table_annotation(scene: TableScene, image_name: str) -> dict[str, Any]:
    return {
        "image": image_name,
        "size": list(scene.image.size),
        "cells": [cell_to_dict(c) for _, c in sorted(scene.rendered.cells.items())],
    }

