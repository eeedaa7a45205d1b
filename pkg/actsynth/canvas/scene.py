"""Scene sampling, overlap-aware placement, styling and the per-scene pipeline."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field

from PIL import Image

from actsynth.canvas.chrome import ChromeAnnotation, draw_chrome
from actsynth.canvas.shapes import (
    COMMON_KINDS,
    SHAPES,
    ShapeKind,
    ShapeResult,
    Style,
    get_kind,
    rasterize_shape,
    shape_extent,
)
from actsynth.geometry import Rect, Rgb, overlap_ratio, sample_color_hsv
from actsynth.refexpr import disambiguate

logger = logging.getLogger(__name__)

WIDTH_RANGE = (800, 2560)
HEIGHT_RANGE = (600, 1440)
ELEMENT_RANGE = (3, 8)
COMMON_WEIGHT = 2.0
PLACEMENT_TRIALS = 50
OVERLAP_THRESHOLD = 0.25
CANVAS_MARGIN = 40
SIZE_RANGE = (0.08, 0.40)
LINE_SIZE_MAX = 0.60
FILL_GAP = 100
OUTLINE_GAP = 60
STROKE_RANGE = (1, 5)
DASH_PROBABILITY = 0.2


@dataclass
class SceneParams:
    width: int
    height: int
    background: Rgb
    element_count: int
    seed: int


@dataclass
class Placement:
    kind: ShapeKind
    box: Rect
    overlap: float
    flagged: bool
    sub_seed: int
    extent: Rect
    flipped: bool = False


@dataclass
class CanvasElement:
    id: str
    kind: ShapeKind
    style: Style
    shape: ShapeResult
    chrome: ChromeAnnotation
    reference: str | None = None
    flagged: bool = False


@dataclass
class CanvasScene:
    id: str
    params: SceneParams
    image: Image.Image
    elements: list[CanvasElement] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return any(e.flagged for e in self.elements)

    @property
    def size(self) -> tuple[int, int]:
        return (self.params.width, self.params.height)


def sample_scene(rng: random.Random) -> SceneParams:
    width = rng.randint(*WIDTH_RANGE)
    height = rng.randint(*HEIGHT_RANGE)
    background = sample_color_hsv(rng).color
    count = rng.randint(*ELEMENT_RANGE)
    return SceneParams(width, height, background, count, rng.getrandbits(64))


def sample_kinds(rng: random.Random, n: int) -> list[ShapeKind]:
    """Draw ``n`` kinds, weighting the common primitives up."""
    kinds = list(SHAPES.values())
    weights = [COMMON_WEIGHT if k.name in COMMON_KINDS else 1.0 for k in kinds]
    return rng.choices(kinds, weights=weights, k=n)


def _even(value: float) -> int:
    return max(2, 2 * int(round(value / 2)))


def candidate_boxes(
    params: SceneParams, kind: str | ShapeKind, sub_seed: int, n: int = PLACEMENT_TRIALS
) -> list[Rect]:
    """The ``n`` candidate boxes a placement with ``sub_seed`` draws, in trial order."""
    kind_info = get_kind(kind)
    rng = random.Random(sub_seed)
    short = min(params.width, params.height)
    upper = LINE_SIZE_MAX if kind_info.line_like else SIZE_RANGE[1]
    usable_w = params.width - 2 * CANVAS_MARGIN
    usable_h = params.height - 2 * CANVAS_MARGIN

    boxes = []
    for _ in range(n):
        w = _even(min(rng.uniform(SIZE_RANGE[0], upper) * short, usable_w))
        h = w if kind_info.square else _even(min(rng.uniform(SIZE_RANGE[0], upper) * short, usable_h))
        x1 = rng.randint(CANVAS_MARGIN, params.width - CANVAS_MARGIN - w)
        y1 = rng.randint(CANVAS_MARGIN, params.height - CANVAS_MARGIN - h)
        boxes.append(Rect(x1, y1, x1 + w, y1 + h))
    return boxes


def place_elements(params: SceneParams, kinds: list[ShapeKind], rng: random.Random) -> list[Placement]:
    """Place kinds sequentially, accepting the first candidate under the overlap threshold.

    Overlap is measured on the extent each candidate will be drawn with, at the
    widest stroke. When no candidate of the trial budget qualifies, the one with
    the lowest maximum overlap is kept and the placement is flagged.
    """
    placed: list[Placement] = []
    for kind in kinds:
        sub_seed = rng.getrandbits(64)
        flipped = placement_flipped(kind, sub_seed)
        best: tuple[Rect, Rect] | None = None
        best_overlap = float("inf")
        for box in candidate_boxes(params, kind, sub_seed):
            extent = shape_extent(kind, box, STROKE_RANGE[1], flipped=flipped)
            overlap = max((overlap_ratio(extent, p.extent) for p in placed), default=0.0)
            if overlap < best_overlap:
                best, best_overlap = (box, extent), overlap
            if overlap < OVERLAP_THRESHOLD:
                break
        assert best is not None
        flagged = best_overlap >= OVERLAP_THRESHOLD
        if flagged:
            logger.debug("placement of %s flagged with overlap %.3f", kind.name, best_overlap)
        placed.append(Placement(kind, best[0], best_overlap, flagged, sub_seed, best[1], flipped))
    return placed


def placement_flipped(kind: str | ShapeKind, sub_seed: int) -> bool:
    """Line kinds run along either diagonal of their box."""
    return get_kind(kind).line_like and random.Random(f"{sub_seed}/flip").random() < 0.5


def crowded_pairs(shapes: list[ShapeResult]) -> set[int]:
    """Indices of drawn shapes whose bboxes overlap another at or above the threshold."""
    crowded = set()
    for i, a in enumerate(shapes):
        for j in range(i):
            overlap = overlap_ratio(a.bbox, shapes[j].bbox)
            if overlap >= OVERLAP_THRESHOLD:
                logger.debug("drawn shapes %d and %d overlap %.3f", j, i, overlap)
                crowded.update((i, j))
    return crowded


def sample_style(rng: random.Random, kind: str | ShapeKind, background: Rgb) -> tuple[Style, bool]:
    """Sample fill, outline, stroke width and dash; returns the style and a fallback flag."""
    kind_info = get_kind(kind)
    if kind_info.line_like:
        fill = None
        outline, flagged = sample_color_hsv(rng, [(background, FILL_GAP)])
    else:
        fill, fill_flagged = sample_color_hsv(rng, [(background, FILL_GAP)])
        outline, outline_flagged = sample_color_hsv(rng, [(fill, OUTLINE_GAP)])
        flagged = fill_flagged or outline_flagged
    width = rng.randint(*STROKE_RANGE)
    line_style = "dashed" if rng.random() < DASH_PROBABILITY else "solid"
    return Style(fill, outline, width, line_style), flagged


def generate_scene(global_seed: int | str, index: int) -> CanvasScene:
    """Build one annotated canvas scene; a pure function of ``(global_seed, index)``."""
    rng = random.Random(f"{global_seed}/{index}")
    params = sample_scene(rng)
    scene_rng = random.Random(params.seed)
    kinds = sample_kinds(scene_rng, params.element_count)
    placements = place_elements(params, kinds, scene_rng)

    image = Image.new("RGB", (params.width, params.height), tuple(params.background))
    drawn = []
    for placement in placements:
        style, style_flagged = sample_style(scene_rng, placement.kind, params.background)
        shape = rasterize_shape(image, placement.kind, placement.box, style, flipped=placement.flipped)
        drawn.append((placement, style, shape, style_flagged))

    crowded = crowded_pairs([shape for _, _, shape, _ in drawn])

    # chrome goes on top of every shape
    scene = CanvasScene(id=f"canvas_{index:06d}", params=params, image=image)
    for n, (placement, style, shape, style_flagged) in enumerate(drawn, start=1):
        scene.elements.append(
            CanvasElement(
                id=f"shape_{n:04d}",
                kind=placement.kind,
                style=style,
                shape=shape,
                chrome=draw_chrome(image, shape, placement.kind, scene_rng),
                flagged=placement.flagged or style_flagged or n - 1 in crowded,
            )
        )

    references = disambiguate(scene.elements, scene.size)
    for element in scene.elements:
        element.reference = references[element.id]
    return scene
