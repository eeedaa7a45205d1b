"""GUI screenshots with element lists: loading and spatially balanced element sampling."""

from __future__ import annotations

import json
import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, get_args

from actsynth.errors import AnnotationError, GeometryError
from actsynth.geometry import Point, Rect

logger = logging.getLogger(__name__)

ElementKind = Literal["icon", "text"]

ELEMENT_KINDS: tuple[str, ...] = get_args(ElementKind)
SAMPLE_COUNT = 10
GRID = 4
NORMALIZED_DECIMALS = 5


@dataclass(frozen=True)
class GuiElement:
    element_id: int
    description: str
    bbox: Rect
    kind: ElementKind

    @property
    def click_point(self) -> Point:
        return self.bbox.center


@dataclass
class GuiScene:
    id: str
    image_ref: Path
    image_size: tuple[int, int]
    elements: list[GuiElement] = field(default_factory=list)

    def element(self, element_id: int) -> GuiElement:
        for e in self.elements:
            if e.element_id == element_id:
                return e
        raise AnnotationError(f"No element {element_id} on screen {self.id}")


def _element(raw: Any, where: str, size: tuple[int, int]) -> GuiElement:
    try:
        element_id = raw["element_id"]
        if isinstance(element_id, bool) or not isinstance(element_id, int):
            raise AnnotationError(f"{where}.element_id: must be an integer")
        bbox = Rect(*(float(v) for v in raw["bbox"]))
        kind = raw.get("kind", "text")
        description = str(raw["description"])
    except (KeyError, TypeError, ValueError) as e:
        raise AnnotationError(f"{where}: malformed element ({e})") from e
    except GeometryError as e:
        raise AnnotationError(f"{where}.bbox: {e}") from e
    if kind not in ELEMENT_KINDS:
        raise AnnotationError(f"{where}.kind: must be one of {', '.join(ELEMENT_KINDS)}, got {kind!r}")
    if bbox.area <= 0 or not bbox.within(*size):
        raise AnnotationError(f"{where}.bbox: {bbox.as_list()} is empty or outside the screen {list(size)}")
    return GuiElement(element_id, description, bbox, kind)


def load_gui_source(path: Path) -> list[GuiScene]:
    """Read ``{"screens": [{"image", "size", "elements": [...]}]}``; image paths are relative to the file."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise AnnotationError(f"Cannot read GUI source {path}: {e}") from e

    scenes = []
    for i, screen in enumerate(doc.get("screens", [])):
        where = f"screens[{i}]"
        try:
            width, height = (int(v) for v in screen["size"])
            image = path.parent / screen["image"]
            raw_elements = screen.get("elements", [])
        except (KeyError, TypeError, ValueError) as e:
            raise AnnotationError(f"{where}: needs image and size [w, h] ({e})") from e
        elements = [_element(raw, f"{where}.elements[{j}]", (width, height)) for j, raw in enumerate(raw_elements)]
        ids = [e.element_id for e in elements]
        if len(set(ids)) != len(ids):
            raise AnnotationError(f"{where}: duplicate element ids")
        scenes.append(GuiScene(f"gui_{i:06d}", image, (width, height), elements))
    logger.info("loaded %d screens from %s", len(scenes), path)
    return scenes


def grid_cell(p: Point, size: tuple[int, int], grid: int = GRID) -> tuple[int, int]:
    col = min(int(p.x / size[0] * grid), grid - 1)
    row = min(int(p.y / size[1] * grid), grid - 1)
    return row, col


def sample_gui_elements(
    scene: GuiScene, rng: random.Random, k: int = SAMPLE_COUNT, grid: int = GRID
) -> list[GuiElement]:
    """Pick up to ``k`` distinct elements spread over a ``grid`` x ``grid`` lattice.

    Cells are visited round-robin in shuffled order; inside a cell icons come
    before text elements.
    """
    buckets: dict[tuple[int, int], list[GuiElement]] = defaultdict(list)
    for element in scene.elements:
        buckets[grid_cell(element.click_point, scene.image_size, grid)].append(element)
    for members in buckets.values():
        rng.shuffle(members)
        members.sort(key=lambda e: ELEMENT_KINDS.index(e.kind))

    cells = sorted(buckets)
    rng.shuffle(cells)
    picked: list[GuiElement] = []
    while len(picked) < k and cells:
        for cell in list(cells):
            if len(picked) == k:
                break
            picked.append(buckets[cell].pop(0))
            if not buckets[cell]:
                cells.remove(cell)
    return picked


def normalize_point(p: Point, size: tuple[int, int]) -> Point:
    """Fractional coordinates in [0, 1], rounded to 5 decimals."""
    return Point(
        round(min(max(p.x / size[0], 0.0), 1.0), NORMALIZED_DECIMALS),
        round(min(max(p.y / size[1], 0.0), 1.0), NORMALIZED_DECIMALS),
    )


def element_to_dict(element: GuiElement, size: tuple[int, int] | None = None) -> dict[str, Any]:
    data: dict[str, Any] = {
        "element_id": element.element_id,
        "description": element.description,
        "bbox": [int(v) if float(v).is_integer() else v for v in element.bbox.as_list()],
        "kind": element.kind,
    }
    if size is not None:
        data["click_point"] = list(normalize_point(element.click_point, size))
    return data
