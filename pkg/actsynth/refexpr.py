"""Referring expressions for canvas elements.

Each element gets a template description built from its nearest palette color
names, its shape label and a coarse canvas region. Elements whose descriptions
collide are separated by a fixed cascade: relative size, outline style, a finer
region grid, and finally a reading-order ordinal.
"""

from __future__ import annotations

import functools
import hashlib
import json
import logging
from collections import Counter, defaultdict
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
from importlib import resources
from typing import TYPE_CHECKING

from actsynth.errors import ConfigError
from actsynth.geometry import Point, Rgb, redmean_distance

if TYPE_CHECKING:
    from actsynth.canvas.scene import CanvasElement

logger = logging.getLogger(__name__)

PALETTE_SIZE = 44
PALETTE_SHA256 = "d65a71bb8567bbb910fd5a5ec2919f9a3a30b928006b4fa72152a268518dc858"
SIZE_MARGIN = 0.05

COARSE_ROWS = ("upper", "center", "lower")
COARSE_COLS = ("left", "center", "right")
FINE_ROWS = ("top", "upper", "middle", "lower", "bottom")
FINE_COLS = ("far-left", "left", "center", "right", "far-right")
ORDINALS = ("second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth")


@dataclass(frozen=True)
class PaletteEntry:
    name: str
    rgb: Rgb


def _parse_palette(raw: bytes) -> tuple[PaletteEntry, ...]:
    entries = tuple(PaletteEntry(item["name"], Rgb.parse(item["rgb"])) for item in json.loads(raw))
    if len(entries) != PALETTE_SIZE:
        raise ConfigError(f"Palette must have {PALETTE_SIZE} entries, got {len(entries)}")
    if len({e.name for e in entries}) != len(entries):
        raise ConfigError("Palette names must be unique")
    return entries


@functools.cache
def load_palette() -> tuple[PaletteEntry, ...]:
    """Read the bundled palette, refusing it if its checksum drifted."""
    raw = (resources.files("actsynth") / "data" / "palette.json").read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    if digest != PALETTE_SHA256:
        raise ConfigError(f"Bundled palette checksum mismatch: {digest}")
    return _parse_palette(raw)


def nearest_color_name(c: Sequence[int], palette: Sequence[PaletteEntry] | None = None) -> str:
    """Palette name with the smallest redmean distance; ties go to the earlier entry."""
    entries = palette if palette is not None else load_palette()
    best = min(range(len(entries)), key=lambda i: (redmean_distance(c, entries[i].rgb), i))
    return entries[best].name


def _cell(value: float, extent: float, granularity: int) -> int:
    return min(max(int(value * granularity // extent), 0), granularity - 1)


def region_phrase(center: Point, canvas_size: tuple[int, int], grid: int = 3) -> str:
    """Name the grid cell holding ``center``.

    The cell index is ``floor(value * grid / extent)``, so a point on a boundary falls in the
    higher cell and the far edge is clamped into the last one.
    """
    width, height = canvas_size
    col = _cell(center[0], width, grid)
    row = _cell(center[1], height, grid)
    if grid == 3:
        if row == 1 and col == 1:
            return "center area of the canvas"
        return f"{COARSE_ROWS[row]}-{COARSE_COLS[col]} area of the canvas"
    if grid == 5:
        return f"{FINE_ROWS[row]} {FINE_COLS[col]} part of the canvas"
    raise ValueError(f"Unsupported grid granularity {grid}")


@dataclass(frozen=True)
class _Description:
    element_id: str
    label: str
    fill: str | None
    outline: str
    line_style: str
    center: Point
    area: float
    line_like: bool
    borderless: bool
    canvas_size: tuple[int, int]
    prefix: str = ""
    show_line_style: bool = False
    fine: bool = False

    def render(self) -> str:
        region = region_phrase(self.center, self.canvas_size, 5 if self.fine else 3)
        dash = f"{self.line_style} " if self.show_line_style else ""
        if self.line_like:
            body = f"{dash}{self.outline} {self.label} in the {region}"
        elif self.borderless:
            body = f"{self.fill}-filled {self.label} in the {region}"
        else:
            body = f"{self.fill}-filled {self.label} with {self.outline} {dash}outline in the {region}"
        return f"{self.prefix} {body}" if self.prefix else body

    @property
    def reading_key(self) -> tuple[float, float, str]:
        return (self.center[1], self.center[0], self.element_id)


def _describe(
    element: CanvasElement, canvas_size: tuple[int, int], palette: Sequence[PaletteEntry] | None
) -> _Description:
    style = element.style
    return _Description(
        element_id=element.id,
        label=element.kind.label,
        fill=nearest_color_name(style.fill, palette) if style.fill is not None else None,
        outline=nearest_color_name(style.outline, palette),
        line_style=style.line_style,
        center=element.shape.center,
        area=element.shape.bbox.area,
        line_like=element.kind.line_like,
        borderless=not element.kind.stroked,
        canvas_size=canvas_size,
    )


def base_reference(
    element: CanvasElement, canvas_size: tuple[int, int], palette: Sequence[PaletteEntry] | None = None
) -> str:
    return _describe(element, canvas_size, palette).render()


def _by_size(group: list[_Description]) -> list[_Description]:
    ordered = sorted(group, key=lambda d: d.area)
    if len(group) == 2:
        small, large = ordered
        if large.area - small.area < SIZE_MARGIN * large.area:
            return group
        return [replace(d, prefix="the larger" if d is large else "the smaller") for d in group]
    out = {id(d): d for d in group}
    smallest, second = ordered[0], ordered[1]
    if second.area - smallest.area >= SIZE_MARGIN * second.area:
        out[id(smallest)] = replace(smallest, prefix="the smallest")
    largest, runner_up = ordered[-1], ordered[-2]
    if largest.area - runner_up.area >= SIZE_MARGIN * largest.area:
        out[id(largest)] = replace(largest, prefix="the largest")
    return [out[id(d)] for d in group]


def _by_line_style(group: list[_Description]) -> list[_Description]:
    if any(d.borderless for d in group):
        return group
    return [replace(d, show_line_style=True) for d in group]


def _by_fine_region(group: list[_Description]) -> list[_Description]:
    return [replace(d, fine=True) for d in group]


def _ordinal_words(n: int) -> list[str]:
    middle = [f"the {ORDINALS[k]}" if k < len(ORDINALS) else f"the {k + 2}th" for k in range(n - 2)]
    return ["the upper", *middle, "the lower"]


def _by_reading_order(group: list[_Description]) -> list[_Description]:
    ordered = sorted(group, key=lambda d: d.reading_key)
    words = dict(zip((d.element_id for d in ordered), _ordinal_words(len(group)), strict=True))
    return [replace(d, prefix=words[d.element_id]) for d in group]


CASCADE: tuple[Callable[[list[_Description]], list[_Description]], ...] = (
    _by_size,
    _by_line_style,
    _by_fine_region,
    _by_reading_order,
)


def _collisions(descriptions: list[_Description]) -> list[list[_Description]]:
    groups: dict[str, list[_Description]] = defaultdict(list)
    for d in descriptions:
        groups[d.render()].append(d)
    return [g for g in groups.values() if len(g) > 1]


def _resolve(group: list[_Description], stage: int) -> list[_Description]:
    """Run the cascade on one collision group from ``stage`` on."""
    if len(group) < 2 or stage >= len(CASCADE):
        return group
    candidate = CASCADE[stage](group)
    if len({d.render() for d in candidate}) == 1:
        return _resolve(group, stage + 1)

    resolved = {d.element_id: d for d in candidate}
    for sub in _collisions(candidate):
        for d in _resolve(sub, stage + 1):
            resolved[d.element_id] = d
    return [resolved[d.element_id] for d in group]


def _apply(descriptions: list[_Description], updated: list[_Description]) -> list[_Description]:
    index = {d.element_id: d for d in updated}
    return [index.get(d.element_id, d) for d in descriptions]


def disambiguate(
    elements: Sequence[CanvasElement],
    canvas_size: tuple[int, int],
    palette: Sequence[PaletteEntry] | None = None,
) -> dict[str, str]:
    """Map each element id to a reference that is unique within the scene.

    The result depends only on the set of elements, not on their input order.
    """
    descriptions = sorted((_describe(e, canvas_size, palette) for e in elements), key=lambda d: d.reading_key)
    for group in _collisions(descriptions):
        descriptions = _apply(descriptions, _resolve(group, 0))

    # a 5x5 cell can straddle two 3x3 cells, so resolved groups may meet again
    for _ in range(len(descriptions)):
        leftovers = _collisions(descriptions)
        if not leftovers:
            break
        for group in leftovers:
            descriptions = _apply(descriptions, _by_reading_order(group))

    references = {d.element_id: d.render() for d in descriptions}
    counts = Counter(references.values())
    for element_id, text in references.items():
        if counts[text] > 1:
            logger.warning("reference %r still collides; suffixing %s", text, element_id)
            references[element_id] = f"{text} ({element_id})"
    return references
