"""Instruction and trace pairs for the detailed grounding tasks.

Two paths produce records. Template generation is deterministic: a generator
picks an eligible element, computes key points and target regions from the
element geometry, and fills a phrasing from the bundled phrase bank. The LLM
path builds a request from a per-modality system prompt and the scene's
annotation, then parses and vets the returned entries.
"""

from __future__ import annotations

import base64
import json
import logging
import mimetypes
import random
import re
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Literal, get_args

import yaml

from actsynth.canvas.annotation import CanvasAnnotation, ElementAnnotation, emit_annotation, scene_annotation
from actsynth.canvas.chrome import box_points
from actsynth.canvas.scene import CanvasScene
from actsynth.canvas.shapes import LINE_KINDS
from actsynth.dataset_io import DatasetRecord, Targets
from actsynth.errors import ConfigError, TraceError, TraceParseError
from actsynth.eval_engine import BannedRegion, CorrectRegion, Modality, Prediction, judge_sample
from actsynth.geometry import Point, Polygon, Rect, point_in_polygon, point_in_rect
from actsynth.gui import GuiScene, element_to_dict, normalize_point, sample_gui_elements
from actsynth.image_annot import ImageScene, RegionAnnotation, region_to_dict, trail_stroke_width, zigzag_trail
from actsynth.table_synth import CellAnnotation, TableScene, cell_to_dict, corner_fill_target, edge_handle, excel_name
from actsynth.text_synth import SpanKind, TextPage, cursor_target, sample_span, span_drag_target
from actsynth.trace_dsl import (
    ActionTrace,
    CoordinateSpace,
    Template,
    Violation,
    classify_action,
    derive_action_type,
    derived_translation,
    parse_trace,
    point_to_trace,
    trace_points,
    validate_trace,
)

logger = logging.getLogger(__name__)

KeyPoints = Literal["1", "2", "N"]
Scene = CanvasScene | CanvasAnnotation | TableScene | TextPage | GuiScene | ImageScene

KEY_POINT_COUNTS: tuple[str, ...] = get_args(KeyPoints)
MIN_PHRASINGS = 3
MAX_PHRASINGS = 6
EDGE_TOLERANCE = 4
CORNER_TOLERANCE = 4
HANDLE_TOLERANCE = 5
DROP_TOLERANCE = 10
MARQUEE_PAD = 16
LASSO_PAD = 16
CROP_TOLERANCE = 6
EDGE_DRAG_STEPS = (20, 30, 40, 50, 60, 80, 100)
GROUNDING_MARGIN = 40


@dataclass(frozen=True)
class DetailedTask:
    modality: Modality
    key_points: KeyPoints
    target_type: str
    ordered: bool = False
    synthesizable: bool = False

    @property
    def key(self) -> str:
        return f"{self.modality}/{self.key_points}/{self.target_type}"


def _t(
    modality: Modality, key_points: KeyPoints, target: str, ordered: bool = False, synth: bool = False
) -> DetailedTask:
    return DetailedTask(modality, key_points, target, ordered, synth)


DETAILED_TASKS: tuple[DetailedTask, ...] = (
    _t("GUI", "1", "icon", synth=True),
    _t("GUI", "1", "text", synth=True),
    _t("GUI", "2", "icon", ordered=True),
    _t("GUI", "2", "slide bar", ordered=True),
    _t("GUI", "2", "empty region"),
    _t("GUI", "2", "text"),
    _t("Text", "1", "between text", synth=True),
    _t("Text", "1", "empty region"),
    _t("Text", "2", "select text span", synth=True),
    _t("Text", "2", "one word", synth=True),
    _t("Text", "2", "drag text span", ordered=True),
    _t("Table", "1", "empty cell", synth=True),
    _t("Table", "1", "content cell", synth=True),
    _t("Table", "2", "drag cell", ordered=True),
    _t("Table", "2", "select cells", synth=True),
    _t("Table", "2", "edge", ordered=True, synth=True),
    _t("Table", "2", "corner", ordered=True, synth=True),
    _t("Canvas", "1", "shape", synth=True),
    _t("Canvas", "2", "empty region", synth=True),
    _t("Canvas", "2", "point", ordered=True, synth=True),
    _t("Canvas", "2", "text"),
    _t("Canvas", "2", "shape", ordered=True, synth=True),
    _t("Canvas", "2", "line/arrow", ordered=True, synth=True),
    _t("Canvas", "N", "point", ordered=True),
    _t("Canvas", "N", "empty region", synth=True),
    _t("Image", "1", "object", synth=True),
    _t("Image", "1", "region"),
    _t("Image", "2", "image", ordered=True),
    _t("Image", "2", "object", ordered=True),
    _t("Image", "2", "point", synth=True),
    _t("Image", "2", "region", ordered=True),
    _t("Image", "N", "zig-zag mask", synth=True),
    _t("Image", "N", "boundary", synth=True),
)
TASKS_BY_KEY = {t.key: t for t in DETAILED_TASKS}


def get_task(key: str) -> DetailedTask:
    try:
        return TASKS_BY_KEY[key]
    except KeyError:
        raise ConfigError(f"Unknown detailed task {key!r}") from None


def synthesizable_tasks(modality: str | None = None) -> list[DetailedTask]:
    return [t for t in DETAILED_TASKS if t.synthesizable and (modality is None or t.modality == modality)]


# -- scenes


def scene_modality(scene: Scene) -> Modality:
    if isinstance(scene, CanvasScene | CanvasAnnotation):
        return "Canvas"
    if isinstance(scene, TableScene):
        return "Table"
    if isinstance(scene, TextPage):
        return "Text"
    if isinstance(scene, GuiScene):
        return "GUI"
    if isinstance(scene, ImageScene):
        return "Image"
    raise TraceError(f"Not a scene: {type(scene).__name__}")


def scene_size(scene: Scene) -> tuple[int, int]:
    if isinstance(scene, CanvasScene):
        return scene.size
    if isinstance(scene, CanvasAnnotation):
        return (scene.width, scene.height)
    if isinstance(scene, TableScene | TextPage):
        return scene.image.size
    return scene.image_size


def scene_element_ids(scene: Scene) -> set[Any]:
    if isinstance(scene, CanvasScene | CanvasAnnotation):
        return {e.id for e in _canvas(scene).elements}
    if isinstance(scene, TableScene):
        return {c.excel_name for c in scene.rendered.cells.values()}
    if isinstance(scene, GuiScene):
        return {e.element_id for e in scene.elements}
    if isinstance(scene, ImageScene):
        return {r.id for r in scene.regions}
    return set()


def _scene_boxes(scene: Scene) -> dict[Any, Rect]:
    if isinstance(scene, CanvasScene | CanvasAnnotation):
        return {e.id: e.bbox for e in _canvas(scene).elements}
    if isinstance(scene, TableScene):
        return {c.excel_name: c.bbox for c in scene.rendered.cells.values()}
    if isinstance(scene, GuiScene):
        return {e.element_id: e.bbox for e in scene.elements}
    if isinstance(scene, ImageScene):
        return {r.id: r.bbox for r in scene.regions}
    return {}


def _canvas(scene: CanvasScene | CanvasAnnotation) -> CanvasAnnotation:
    return scene if isinstance(scene, CanvasAnnotation) else scene_annotation(scene)


# -- phrase bank


@dataclass(frozen=True)
class Phrasing:
    prompts: tuple[str, ...]
    thoughts: tuple[str, ...]


def _phrasing(raw: Any, where: str) -> Phrasing:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected prompts and thoughts")
    prompts = tuple(str(p) for p in raw.get("prompts", []))
    thoughts = tuple(str(t) for t in raw.get("thoughts", []))
    if not MIN_PHRASINGS <= len(prompts) <= MAX_PHRASINGS:
        raise ConfigError(f"{where}: needs {MIN_PHRASINGS}-{MAX_PHRASINGS} prompts, has {len(prompts)}")
    if not thoughts:
        raise ConfigError(f"{where}: needs at least one thought")
    return Phrasing(prompts, thoughts)


def parse_phrase_bank(doc: Any) -> dict[str, dict[str, Phrasing]]:
    if not isinstance(doc, dict):
        raise ConfigError("phrase bank must be a mapping of task keys")
    bank: dict[str, dict[str, Phrasing]] = {}
    for key, raw in doc.items():
        get_task(key)
        if isinstance(raw, dict) and "prompts" in raw:
            bank[key] = {"default": _phrasing(raw, key)}
        elif isinstance(raw, dict):
            bank[key] = {str(name): _phrasing(v, f"{key}.{name}") for name, v in raw.items()}
        else:
            raise ConfigError(f"{key}: expected a mapping")
    return bank


@lru_cache(maxsize=1)
def load_phrase_bank() -> dict[str, dict[str, Phrasing]]:
    text = (resources.files("actsynth") / "data" / "phrases.yaml").read_text(encoding="utf-8")
    return parse_phrase_bank(yaml.safe_load(text))


# -- drafts: key points and targets for one element, before phrasing


@dataclass
class _Draft:
    points: list[Point]
    template: Template
    fields: dict[str, Any]
    targets: Targets
    used: list[Any] = field(default_factory=list)
    variant: str = "default"


Generator = Callable[[Any, random.Random], "_Draft | None"]
_GENERATORS: dict[str, Generator] = {}


def _generator(key: str) -> Callable[[Generator], Generator]:
    def register(fn: Generator) -> Generator:
        _GENERATORS[key] = fn
        return fn

    return register


def _around(p: Point, radius: float, size: tuple[int, int]) -> Rect:
    return Rect.around(p, radius).clip(*size)


def _ranked(*shapes: Rect) -> list[CorrectRegion]:
    return [CorrectRegion(s, rank) for rank, s in enumerate(shapes)]


def _where(hint: str) -> str:
    return f" {hint}" if hint else ""


def _article(reference: str) -> str:
    return reference if reference.startswith(("the ", "a ", "an ")) else f"the {reference}"


# GUI


def _gui_click(kind: str) -> Generator:
    def generate(scene: GuiScene, rng: random.Random) -> _Draft | None:
        candidates = [e for e in sample_gui_elements(scene, rng) if e.kind == kind]
        if not candidates:
            return None
        e = rng.choice(candidates)
        targets = Targets([CorrectRegion(e.bbox)])
        return _Draft([e.click_point], "click", {"ref": e.description}, targets, [e.element_id])

    return generate


_generator("GUI/1/icon")(_gui_click("icon"))
_generator("GUI/1/text")(_gui_click("text"))


# Text


def _span_fields(text: str, hint: str) -> dict[str, str]:
    flat = " ".join(text.split())
    words = flat.split(" ")
    return {"text": flat, "head": " ".join(words[:3]), "tail": " ".join(words[-3:]), "where": _where(hint)}


@_generator("Text/1/between text")
def _text_cursor(page: TextPage, rng: random.Random) -> _Draft | None:
    span = sample_span(page, rng, "word")
    if span is None:
        return None
    region = cursor_target(page, span.start)
    return _Draft([region.shape.center], "click", _span_fields(span.text, span.context_hint), Targets([region]))


def _text_drag(page: TextPage, rng: random.Random, kinds: Sequence[SpanKind]) -> _Draft | None:
    for kind in kinds:
        span = sample_span(page, rng, kind)
        if span is None:
            continue
        regions = span_drag_target(page, span)
        variant = {"short_span": "short", "long_span": "long"}.get(kind, "default")
        points = [r.shape.center for r in regions]
        return _Draft(points, "drag", _span_fields(span.text, span.context_hint), Targets(regions), variant=variant)
    return None


@_generator("Text/2/select text span")
def _text_select(page: TextPage, rng: random.Random) -> _Draft | None:
    kinds: list[SpanKind] = ["short_span", "long_span"]
    rng.shuffle(kinds)
    return _text_drag(page, rng, kinds)


@_generator("Text/2/one word")
def _text_word(page: TextPage, rng: random.Random) -> _Draft | None:
    return _text_drag(page, rng, ["word"])


# Table


def _visible_cells(scene: TableScene) -> list[CellAnnotation]:
    w, h = scene.image.size
    return [c for _, c in sorted(scene.rendered.cells.items()) if c.bbox.area > 0 and c.bbox.within(w, h)]


def _headed(cell: CellAnnotation, cells: Sequence[CellAnnotation]) -> bool:
    if cell.row == 0 or cell.col == 0 or not cell.row_header.strip() or not cell.col_header.strip():
        return False
    pair = (cell.row_header, cell.col_header)
    return sum((c.row_header, c.col_header) == pair for c in cells) == 1


def _table_click(empty: bool) -> Generator:
    def generate(scene: TableScene, rng: random.Random) -> _Draft | None:
        cells = _visible_cells(scene)
        candidates = [c for c in cells if (c.content.strip() == "") == empty]
        if not candidates:
            return None
        cell = rng.choice(candidates)
        variant = "headed" if _headed(cell, cells) and rng.random() < 0.5 else "plain"
        fields = {
            "name": cell.excel_name,
            "content": cell.content,
            "row_header": cell.row_header,
            "col_header": cell.col_header,
        }
        targets = Targets([CorrectRegion(cell.bbox)])
        return _Draft([cell.bbox.center], "click", fields, targets, [cell.excel_name], variant)

    return generate


_generator("Table/1/empty cell")(_table_click(empty=True))
_generator("Table/1/content cell")(_table_click(empty=False))


@_generator("Table/2/select cells")
def _table_range(scene: TableScene, rng: random.Random) -> _Draft | None:
    cells = _visible_cells(scene)
    if len(cells) < 2:
        return None
    a, b = rng.sample(cells, 2)
    if (b.row, b.col) < (a.row, a.col):
        a, b = b, a
    fields = {"start": a.excel_name, "end": b.excel_name}
    targets = Targets([CorrectRegion(a.bbox), CorrectRegion(b.bbox)])
    return _Draft([a.bbox.center, b.bbox.center], "drag", fields, targets, [a.excel_name, b.excel_name])


def _column_letters(col: int) -> str:
    return excel_name(0, col).rstrip("0123456789")


@_generator("Table/2/edge")
def _table_edge(scene: TableScene, rng: random.Random) -> _Draft | None:
    size = scene.image.size
    amount = rng.choice(EDGE_DRAG_STEPS)
    candidates = [c for c in _visible_cells(scene) if c.bbox.x2 + amount + EDGE_TOLERANCE <= size[0]]
    if not candidates:
        return None
    cell = rng.choice(candidates)
    b = cell.bbox
    start = edge_handle(cell)
    end = Point(start.x + amount, start.y)
    targets = Targets(
        _ranked(
            Rect(b.x2 - EDGE_TOLERANCE, b.y1, b.x2 + EDGE_TOLERANCE, b.y2),
            Rect(end.x - EDGE_TOLERANCE, b.y1, end.x + EDGE_TOLERANCE, b.y2),
        )
    )
    fields = {"name": cell.excel_name, "column": _column_letters(cell.col + cell.col_span - 1), "amount": amount}
    return _Draft([start, end], "drag", fields, targets, [cell.excel_name])


@_generator("Table/2/corner")
def _table_corner(scene: TableScene, rng: random.Random) -> _Draft | None:
    size = scene.image.size
    candidates = [c for c in _visible_cells(scene) if not corner_fill_target(c, size).clipped]
    if not candidates:
        return None
    cell = rng.choice(candidates)
    fill = corner_fill_target(cell, size).rect
    start = Point(cell.bbox.x2, cell.bbox.y2)
    end = Point(fill.x2, fill.y2)
    targets = Targets(_ranked(_around(start, CORNER_TOLERANCE, size), _around(end, CORNER_TOLERANCE, size)))
    fields = {"name": cell.excel_name, "below": excel_name(cell.row + cell.row_span, cell.col)}
    return _Draft([start, end], "drag", fields, targets, [cell.excel_name])


# Canvas

HANDLE_PHRASES = {
    "top_left": "top-left",
    "top_center": "top",
    "top_right": "top-right",
    "right_center": "right",
    "bottom_right": "bottom-right",
    "bottom_center": "bottom",
    "bottom_left": "bottom-left",
    "left_center": "left",
}
FEATURE_PHRASES = {
    "top_left": "top-left corner",
    "top_center": "top edge midpoint",
    "top_right": "top-right corner",
    "right_center": "right edge midpoint",
    "bottom_right": "bottom-right corner",
    "bottom_center": "bottom edge midpoint",
    "bottom_left": "bottom-left corner",
    "left_center": "left edge midpoint",
}


def _is_line(e: ElementAnnotation) -> bool:
    return e.shape_type in LINE_KINDS


def _on_any(p: Point, boxes: Sequence[Rect]) -> bool:
    return any(point_in_rect(p, b) for b in boxes)


@_generator("Canvas/1/shape")
def _canvas_click(scene: CanvasScene | CanvasAnnotation, rng: random.Random) -> _Draft | None:
    ann = _canvas(scene)
    candidates = [
        e for e in ann.elements if not _on_any(e.center_point, [o.bbox for o in ann.elements if o.id != e.id])
    ]
    if not candidates:
        return None
    e = rng.choice(candidates)
    banned = [BannedRegion(o.bbox) for o in ann.elements if o.id != e.id]
    targets = Targets([CorrectRegion(e.bbox)], banned)
    return _Draft([e.center_point], "click", {"ref": _article(e.reference)}, targets, [e.id])


@_generator("Canvas/2/empty region")
def _canvas_marquee(scene: CanvasScene | CanvasAnnotation, rng: random.Random) -> _Draft | None:
    ann = _canvas(scene)
    size = (ann.width, ann.height)
    boxes = [e.bbox for e in ann.elements]
    candidates = []
    for e in ann.elements:
        start = Point(e.bbox.x1 - MARQUEE_PAD, e.bbox.y1 - MARQUEE_PAD)
        end = Point(e.bbox.x2 + MARQUEE_PAD, e.bbox.y2 + MARQUEE_PAD)
        if start.x < 0 or start.y < 0 or end.x > size[0] or end.y > size[1]:
            continue
        if _on_any(start, boxes) or _on_any(end, boxes):
            continue
        candidates.append((e, start, end))
    if not candidates:
        return None
    e, start, end = rng.choice(candidates)
    b = e.bbox
    pad = 2 * MARQUEE_PAD
    correct = [
        CorrectRegion(Rect(b.x1 - pad, b.y1 - pad, b.x1, b.y1).clip(*size)),
        CorrectRegion(Rect(b.x2, b.y2, b.x2 + pad, b.y2 + pad).clip(*size)),
    ]
    targets = Targets(correct, [BannedRegion(box) for box in boxes])
    return _Draft([start, end], "drag", {"ref": _article(e.reference)}, targets, [e.id])


def _pair(
    ann: CanvasAnnotation, rng: random.Random, moving: Sequence[ElementAnnotation]
) -> tuple[ElementAnnotation, ElementAnnotation] | None:
    if not moving or len(ann.elements) < 2:
        return None
    e = rng.choice(moving)
    other = rng.choice([o for o in ann.elements if o.id != e.id])
    return e, other


@_generator("Canvas/2/point")
def _canvas_handle(scene: CanvasScene | CanvasAnnotation, rng: random.Random) -> _Draft | None:
    ann = _canvas(scene)
    picked = _pair(ann, rng, [e for e in ann.elements if not _is_line(e)])
    if picked is None:
        return None
    e, other = picked
    handle = rng.choice(sorted(e.box_points))
    size = (ann.width, ann.height)
    start, end = e.box_points[handle], other.center_point
    targets = Targets(_ranked(_around(start, HANDLE_TOLERANCE, size), _around(end, DROP_TOLERANCE, size)))
    fields = {
        "handle": HANDLE_PHRASES.get(handle, handle.replace("_", " ")),
        "ref": _article(e.reference),
        "other": _article(other.reference),
    }
    return _Draft([start, end], "drag", fields, targets, [e.id, other.id])


@_generator("Canvas/2/shape")
def _canvas_move(scene: CanvasScene | CanvasAnnotation, rng: random.Random) -> _Draft | None:
    ann = _canvas(scene)
    size = (ann.width, ann.height)
    picked = _pair(ann, rng, [e for e in ann.elements if not _is_line(e)])
    if picked is None:
        return None
    e, other = picked
    feature = rng.choice(sorted(FEATURE_PHRASES))
    corners = box_points(e.bbox)
    anchor = e.center_point
    drop = derived_translation(corners[feature], anchor, other.center_point)
    if not (0 <= drop.x <= size[0] and 0 <= drop.y <= size[1]):
        return None
    targets = Targets(_ranked(_around(anchor, DROP_TOLERANCE, size), _around(drop, DROP_TOLERANCE, size)))
    fields = {"feature": FEATURE_PHRASES[feature], "ref": _article(e.reference), "other": _article(other.reference)}
    return _Draft([anchor, drop], "drag", fields, targets, [e.id, other.id])


@_generator("Canvas/2/line/arrow")
def _canvas_line_end(scene: CanvasScene | CanvasAnnotation, rng: random.Random) -> _Draft | None:
    ann = _canvas(scene)
    size = (ann.width, ann.height)
    picked = _pair(ann, rng, [e for e in ann.elements if _is_line(e) and e.endpoints])
    if picked is None:
        return None
    e, other = picked
    end_name = rng.choice(sorted(e.endpoints))
    start, end = e.endpoints[end_name], other.center_point
    targets = Targets(_ranked(_around(start, HANDLE_TOLERANCE, size), _around(end, DROP_TOLERANCE, size)))
    fields = {"end": end_name, "ref": _article(e.reference), "other": _article(other.reference)}
    return _Draft([start, end], "drag", fields, targets, [e.id, other.id])


@_generator("Canvas/N/empty region")
def _canvas_lasso(scene: CanvasScene | CanvasAnnotation, rng: random.Random) -> _Draft | None:
    ann = _canvas(scene)
    size = (ann.width, ann.height)
    boxes = [e.bbox for e in ann.elements]
    candidates = []
    for e in ann.elements:
        ring = list(box_points(e.bbox.dilate(LASSO_PAD)).values())
        if all(0 <= p.x <= size[0] and 0 <= p.y <= size[1] and not _on_any(p, boxes) for p in ring):
            candidates.append((e, ring))
    if not candidates:
        return None
    e, ring = rng.choice(candidates)
    targets = Targets(
        [CorrectRegion(e.bbox.dilate(2 * LASSO_PAD).clip(*size))], [BannedRegion(box) for box in boxes]
    )
    return _Draft([*ring, ring[0]], "draw", {"ref": _article(e.reference)}, targets, [e.id])


# Image


def _region_shape(region: RegionAnnotation) -> Rect | Polygon:
    polygon = region.polygon
    return polygon if polygon is not None else region.bbox


@_generator("Image/1/object")
def _image_click(scene: ImageScene, rng: random.Random) -> _Draft | None:
    if not scene.regions:
        return None
    region = rng.choice(scene.regions)
    polygon = region.polygon
    shape = polygon if polygon is not None and point_in_polygon(region.click_point, polygon) else region.bbox
    targets = Targets([CorrectRegion(shape)])
    return _Draft([region.click_point], "click", {"caption": region.caption}, targets, [region.id])


@_generator("Image/2/point")
def _image_crop(scene: ImageScene, rng: random.Random) -> _Draft | None:
    if not scene.regions:
        return None
    region = rng.choice(scene.regions)
    b = region.bbox
    start, end = Point(b.x1, b.y1), Point(b.x2, b.y2)
    size = scene.image_size
    targets = Targets([CorrectRegion(_around(p, CROP_TOLERANCE, size)) for p in (start, end)])
    return _Draft([start, end], "drag", {"caption": region.caption}, targets, [region.id])


def _outlined(scene: ImageScene, rng: random.Random) -> RegionAnnotation | None:
    candidates = [r for r in scene.regions if len(set(r.boundary)) >= 3]
    return rng.choice(candidates) if candidates else None


@_generator("Image/N/zig-zag mask")
def _image_mask(scene: ImageScene, rng: random.Random) -> _Draft | None:
    region = _outlined(scene, rng)
    if region is None:
        return None
    trail = zigzag_trail(list(region.boundary))
    width = max(1, round(trail_stroke_width(region.bbox, len(region.boundary))))
    fields = {"caption": region.caption, "width": width}
    return _Draft(trail, "draw", fields, Targets([CorrectRegion(_region_shape(region))]), [region.id])


@_generator("Image/N/boundary")
def _image_outline(scene: ImageScene, rng: random.Random) -> _Draft | None:
    region = _outlined(scene, rng)
    if region is None:
        return None
    loop = [*region.boundary, region.boundary[0]]
    targets = Targets([CorrectRegion(_region_shape(region))])
    return _Draft(loop, "draw", {"caption": region.caption}, targets, [region.id])


# -- template path


def self_grounded(record: DatasetRecord) -> bool:
    """Whether the record's key points succeed against its own target regions."""
    sample = record.as_sample("self")
    return judge_sample(sample, Prediction("self", tuple(record.key_points()))).success


def _coordinate_space(modality: str) -> CoordinateSpace:
    return "normalized" if modality == "GUI" else "pixels"


def template_generate(
    scene: Scene,
    task: DetailedTask,
    rng: random.Random,
    *,
    image_ref: str | None = None,
    count: int = 1,
) -> list[DatasetRecord]:
    """Up to ``count`` distinct records for ``task`` on ``scene``; empty when nothing on the scene fits."""
    modality = scene_modality(scene)
    if task.modality != modality:
        raise TraceError(f"Task {task.key} cannot run on a {modality} scene")
    if not task.synthesizable:
        logger.debug("task %s has no template generator", task.key)
        return []

    bank = load_phrase_bank()[task.key]
    generate = _GENERATORS[task.key]
    size = scene_size(scene)
    space = _coordinate_space(modality)
    elements = scene_element_ids(scene)
    ref = image_ref or f"{getattr(scene, 'id', 'scene')}.png"

    records: list[DatasetRecord] = []
    seen: set[tuple[Point, ...]] = set()
    for _ in range(max(count, 1) * 4):
        if len(records) >= count:
            break
        draft = generate(scene, rng)
        if draft is None:
            break
        key = tuple(draft.points)
        if key in seen:
            continue
        seen.add(key)

        phrasing = bank[draft.variant]
        prompt = rng.choice(phrasing.prompts).format(**draft.fields)
        thought = rng.choice(phrasing.thoughts).format(**draft.fields)
        points = [normalize_point(p, size) for p in draft.points] if space == "normalized" else draft.points
        trace = point_to_trace(
            points, draft.template, chain_of_thought=thought, used_elements=draft.used, coordinate_space=space
        )
        record = DatasetRecord(prompt, trace, modality, ref, size, task.key, draft.targets)
        problems = record.violations(elements)
        if problems:
            logger.warning("%s: dropped record with %s", task.key, ", ".join(str(v) for v in problems))
            continue
        if not self_grounded(record):
            logger.warning("%s: dropped record whose key points miss their own targets", task.key)
            continue
        records.append(record)
    return records


# -- LLM path

SYSTEM_PROMPTS = {"GUI": "gui.txt", "Table": "table.txt", "Canvas": "canvas.txt", "Image": "image.txt"}
_JSON_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class CountContract:
    total: int | None = None
    min_one_set: int = 0
    max_center: int | None = None
    max_control: int | None = None


COUNT_CONTRACTS = {
    "GUI": CountContract(total=10, min_one_set=5),
    "Table": CountContract(total=4, min_one_set=1),
    "Canvas": CountContract(total=10, max_center=3, max_control=4),
    "Image": CountContract(),
}


def load_system_prompt(modality: str) -> str:
    if modality not in SYSTEM_PROMPTS:
        raise ConfigError(f"No system prompt registered for modality {modality!r}")
    prompts = resources.files("actsynth") / "data" / "prompts"
    common = (prompts / "common.txt").read_text(encoding="utf-8").strip()
    body = (prompts / SYSTEM_PROMPTS[modality]).read_text(encoding="utf-8")
    return body.replace("%COMMON%", common).strip() + "\n"


@dataclass
class LlmRequest:
    modality: Modality
    system_prompt_id: str
    system_prompt: str
    image_ref: str
    elements: list[dict[str, Any]]
    image_path: Path | None = None

    @property
    def payload(self) -> str:
        return json.dumps(self.elements, ensure_ascii=False)

    def image_url(self) -> str:
        """A data URL for a readable local image, otherwise the reference unchanged."""
        if self.image_path is not None and self.image_path.is_file():
            mime = mimetypes.guess_type(self.image_path.name)[0] or "image/png"
            encoded = base64.b64encode(self.image_path.read_bytes()).decode("ascii")
            return f"data:{mime};base64,{encoded}"
        return self.image_ref

    def messages(self) -> list[dict[str, Any]]:
        return [
            {"role": "system", "content": self.system_prompt},
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": self.payload},
                    {"type": "image_url", "image_url": {"url": self.image_url()}},
                ],
            },
        ]


def build_llm_request(
    modality: Modality,
    scene: Scene,
    rng: random.Random | None = None,
    *,
    image_ref: str | None = None,
    image_path: Path | None = None,
) -> LlmRequest:
    """System prompt for ``modality`` plus the scene's elements in that modality's annotation schema."""
    system_prompt = load_system_prompt(modality)
    if scene_modality(scene) != modality:
        raise ConfigError(f"A {scene_modality(scene)} scene cannot feed a {modality} request")
    rng = rng or random.Random(0)
    if isinstance(scene, GuiScene):
        elements = [element_to_dict(e, scene.image_size) for e in sample_gui_elements(scene, rng)]
    elif isinstance(scene, TableScene):
        cells = _visible_cells(scene)
        elements = [cell_to_dict(rng.choice(cells))] if cells else []
    elif isinstance(scene, CanvasScene | CanvasAnnotation):
        elements = emit_annotation(scene)["elements"]
    else:
        elements = [region_to_dict(r) for r in scene.regions]  # type: ignore[union-attr]
    ref = image_ref or f"{getattr(scene, 'id', 'scene')}.png"
    return LlmRequest(modality, SYSTEM_PROMPTS[modality], system_prompt, ref, elements, image_path)


@dataclass
class Rejection:
    index: int
    violations: list[Violation]
    entry: Any = None

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.violations]


@dataclass
class ParsedResponse:
    accepted: list[DatasetRecord] = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)


def extract_json_array(text: str) -> list[Any]:
    """The JSON array in ``text``, fenced or bare."""
    candidates = [m.group(1) for m in _JSON_FENCE_RE.finditer(text)]
    start, end = text.find("["), text.rfind("]")
    if start != -1 and end > start:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            value = json.loads(candidate)
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    raise ValueError("no JSON array found in the response")


def _control_points(scene: Scene) -> tuple[list[Point], list[Point]]:
    """(center points, other control points) a canvas entry may reuse."""
    if not isinstance(scene, CanvasScene | CanvasAnnotation):
        return [], []
    centers, controls = [], []
    for e in _canvas(scene).elements:
        centers.append(e.center_point)
        controls.extend(e.box_points.values())
        controls.extend(e.vertices.values())
        controls.extend(e.endpoints.values())
        controls.append(e.rotation_handle_center)
    return centers, controls


def _uses(points: Sequence[Point], anchors: Sequence[Point]) -> bool:
    return any(abs(p.x - a.x) <= 1 and abs(p.y - a.y) <= 1 for p in points for a in anchors)


def _entry_trace(entry: Any, space: CoordinateSpace) -> ActionTrace:
    if not isinstance(entry, dict):
        raise TraceParseError("entry is not an object")
    for key in ("prompt", "response"):
        if not isinstance(entry.get(key), str):
            raise TraceParseError(f"entry has no {key!r} string")
    cmap = entry.get("coordinate_map") or {}
    if not isinstance(cmap, dict):
        raise TraceParseError("coordinate_map is not an object")
    used = entry.get("used_elements") or []
    if not isinstance(used, list):
        raise TraceParseError("used_elements is not a list")
    if not all(isinstance(u, str | int) and not isinstance(u, bool) for u in used):
        raise TraceParseError("used_elements must hold string or integer ids")
    trace = parse_trace(entry["response"], cmap, used, str(entry.get("action-type", "")), space)
    if not trace.action_type:
        trace.action_type = derive_action_type(trace.script)
    return trace


def _action_class(trace: ActionTrace) -> str:
    try:
        return classify_action(trace.script)
    except TraceError:
        return "invalid"


def parse_llm_response(
    text: str, scene: Scene, *, image_ref: str | None = None, modality: Modality | None = None
) -> ParsedResponse:
    """Split an LLM answer into accepted records and rejected entries with their violation names.

    Rejected entries are logged and never repaired.
    """
    modality = modality or scene_modality(scene)
    contract = COUNT_CONTRACTS.get(modality, CountContract())
    size = scene_size(scene)
    space = _coordinate_space(modality)
    elements = scene_element_ids(scene)
    boxes = _scene_boxes(scene)
    centers, controls = _control_points(scene)
    ref = image_ref or f"{getattr(scene, 'id', 'scene')}.png"
    result = ParsedResponse()

    try:
        entries = extract_json_array(text)
    except ValueError as e:
        result.rejected.append(Rejection(-1, [Violation("ParseError", str(e))], text))
        logger.warning("LLM response rejected: %s", e)
        return result

    center_used = control_used = 0
    for i, entry in enumerate(entries):
        if contract.total is not None and i >= contract.total:
            violation = Violation("CountExceeded", f"only {contract.total} entries allowed")
            result.rejected.append(Rejection(i, [violation], entry))
            continue
        try:
            trace = _entry_trace(entry, space)
        except TraceParseError as e:
            result.rejected.append(Rejection(i, [Violation("ParseError", str(e))], entry))
            continue

        violations = validate_trace(trace, elements, size)
        record = DatasetRecord(entry["prompt"], trace, modality, ref, size)
        if not violations and trace.used_elements:
            points = record.key_points()
            zone = [
                boxes[u].dilate(GROUNDING_MARGIN)
                for u in trace.used_elements
                if isinstance(u, str | int) and u in boxes
            ]
            if points and zone and not _on_any(points[0], zone):
                violations.append(Violation("Ungrounded", "first key point is far from every used element"))

        if not violations and modality == "Canvas":
            points = trace_points(trace)
            uses_center = _uses(points, centers)
            uses_control = _uses(points, controls)
            if uses_center and contract.max_center is not None and center_used >= contract.max_center:
                violations.append(Violation("CenterQuota", f"more than {contract.max_center} entries use a center"))
            elif uses_control and contract.max_control is not None and control_used >= contract.max_control:
                violations.append(
                    Violation("ControlPointQuota", f"more than {contract.max_control} entries use control points")
                )
            else:
                center_used += uses_center
                control_used += uses_control

        if violations:
            result.rejected.append(Rejection(i, violations, entry))
        else:
            result.accepted.append(record)

    for rejection in result.rejected:
        logger.warning("LLM entry %d rejected: %s", rejection.index, ", ".join(rejection.names))
    one_set = sum(_action_class(r.trace) == "OneSet" for r in result.accepted)
    if one_set < contract.min_one_set:
        logger.warning("LLM batch has %d OneSet entries, fewer than %d", one_set, contract.min_one_set)
    return result
