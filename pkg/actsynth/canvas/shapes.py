"""Shape library for the canvas simulator.

Every kind is a builder that maps a placement box to fill rings, stroke paths and
named points; ``rasterize_shape`` turns that geometry into pixels. Curves are
sampled into polylines so solid and dashed strokes share one code path.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import cv2
import numpy as np
from PIL import Image, ImageDraw

from actsynth.errors import ShapeError
from actsynth.geometry import Point, Rect, Rgb

Category = Literal[
    "rectangles",
    "ellipses",
    "triangles",
    "quadrilaterals",
    "polygons",
    "stars",
    "arrows",
    "lines",
    "callouts",
    "special",
    "text-boxes",
]
LineStyle = Literal["solid", "dashed"]
FPoint = tuple[float, float]

CURVE_SAMPLES = 72
ARROWHEAD_MIN = 8


@dataclass(frozen=True)
class Style:
    fill: Rgb | None
    outline: Rgb
    stroke_width: int
    line_style: LineStyle = "solid"


@dataclass
class ShapeGeometry:
    """Unrasterized geometry in canvas coordinates.

    ``strokes=None`` means the outline is traced from the filled mask.
    """

    rings: list[tuple[list[FPoint], bool]] = field(default_factory=list)
    strokes: list[tuple[list[FPoint], bool]] | None = field(default_factory=list)
    vertices: dict[str, FPoint] = field(default_factory=dict)
    endpoints: dict[str, FPoint] = field(default_factory=dict)
    heads: list[tuple[FPoint, FPoint]] = field(default_factory=list)


@dataclass(frozen=True)
class ShapeResult:
    bbox: Rect
    center: Point
    vertices: dict[str, Point]
    endpoints: dict[str, Point]


@dataclass(frozen=True)
class ShapeKind:
    name: str
    category: Category
    label: str
    builder: Callable[[Rect], ShapeGeometry]
    square: bool = False
    line_like: bool = False
    common: bool = False
    stroked: bool = True


SHAPES: dict[str, ShapeKind] = {}


def get_kind(kind: str | ShapeKind) -> ShapeKind:
    if isinstance(kind, ShapeKind):
        return kind
    try:
        return SHAPES[kind]
    except KeyError:
        raise ShapeError(f"Unknown shape kind: {kind!r}") from None


def _at(b: Rect, u: float, v: float) -> FPoint:
    return (b.x1 + u * b.width, b.y1 + v * b.height)


def _arc(cx: float, cy: float, rx: float, ry: float, start: float, end: float, n: int) -> list[FPoint]:
    angles = np.radians(np.linspace(start, end, n))
    return [(cx + rx * math.cos(a), cy + ry * math.sin(a)) for a in angles]


def _unit_arc(b: Rect, cu: float, cv: float, ru: float, rv: float, start: float, end: float, n: int) -> list[FPoint]:
    cx, cy = _at(b, cu, cv)
    return _arc(cx, cy, ru * b.width, rv * b.height, start, end, n)


def _closed(pts: list[FPoint], vertices: dict[str, FPoint] | None = None) -> ShapeGeometry:
    return ShapeGeometry(rings=[(pts, False)], strokes=[(pts, True)], vertices=vertices or {})


def _polygon(b: Rect, unit: Sequence[FPoint], names: Sequence[str | None] | None = None) -> ShapeGeometry:
    pts = [_at(b, u, v) for u, v in unit]
    if names is None:
        names = [f"v{i + 1}" for i in range(len(pts))]
    return _closed(pts, {n: p for n, p in zip(names, pts, strict=True) if n})


def _bezier(p0: FPoint, p1: FPoint, p2: FPoint, p3: FPoint | None = None, n: int = 24) -> list[FPoint]:
    t = np.linspace(0.0, 1.0, n)
    if p3 is None:
        xs = (1 - t) ** 2 * p0[0] + 2 * (1 - t) * t * p1[0] + t**2 * p2[0]
        ys = (1 - t) ** 2 * p0[1] + 2 * (1 - t) * t * p1[1] + t**2 * p2[1]
    else:
        xs = (1 - t) ** 3 * p0[0] + 3 * (1 - t) ** 2 * t * p1[0] + 3 * (1 - t) * t**2 * p2[0] + t**3 * p3[0]
        ys = (1 - t) ** 3 * p0[1] + 3 * (1 - t) ** 2 * t * p1[1] + 3 * (1 - t) * t**2 * p2[1] + t**3 * p3[1]
    return list(zip(xs.tolist(), ys.tolist(), strict=True))


CORNER_NAMES = ("top_left", "top_right", "bottom_right", "bottom_left")


def _rectangle(b: Rect) -> ShapeGeometry:
    return _polygon(b, [(0, 0), (1, 0), (1, 1), (0, 1)], CORNER_NAMES)


def _rounded_points(x1: float, y1: float, x2: float, y2: float) -> list[list[FPoint]]:
    r = 0.15 * min(x2 - x1, y2 - y1)
    return [
        _arc(x1 + r, y1 + r, r, r, 180, 270, 10),
        _arc(x2 - r, y1 + r, r, r, 270, 360, 10),
        _arc(x2 - r, y2 - r, r, r, 0, 90, 10),
        _arc(x1 + r, y2 - r, r, r, 90, 180, 10),
    ]


def _rounded_rectangle(b: Rect) -> ShapeGeometry:
    corners = _rounded_points(b.x1, b.y1, b.x2, b.y2)
    return _closed([p for arc in corners for p in arc])


def _borderless(b: Rect) -> ShapeGeometry:
    return ShapeGeometry(rings=[(_rectangle(b).rings[0][0], False)], strokes=[])


def _ellipse(b: Rect) -> ShapeGeometry:
    return _closed(_unit_arc(b, 0.5, 0.5, 0.5, 0.5, 0, 360, CURVE_SAMPLES + 1)[:-1])


def _cross(b: Rect) -> ShapeGeometry:
    unit = [
        (0.1, 0), (0.5, 0.4), (0.9, 0), (1, 0.1), (0.6, 0.5), (1, 0.9),
        (0.9, 1), (0.5, 0.6), (0.1, 1), (0, 0.9), (0.4, 0.5), (0, 0.1),
    ]  # fmt: skip
    return _polygon(b, unit)


def _plus(b: Rect) -> ShapeGeometry:
    unit = [
        (0.35, 0), (0.65, 0), (0.65, 0.35), (1, 0.35), (1, 0.65), (0.65, 0.65),
        (0.65, 1), (0.35, 1), (0.35, 0.65), (0, 0.65), (0, 0.35), (0.35, 0.35),
    ]  # fmt: skip
    return _polygon(b, unit)


def _equilateral(b: Rect) -> ShapeGeometry:
    half = int(min(b.width, b.height * 2 / math.sqrt(3)) // 2)
    height = round(half * math.sqrt(3))
    cx = (b.x1 + b.x2) // 2
    base = b.y1 + (b.height + height) // 2
    pts = [(cx, base - height), (cx + half, base), (cx - half, base)]
    return _closed(pts, dict(zip(("apex", "bottom_right", "bottom_left"), pts, strict=True)))


def _regular(n: int) -> Callable[[Rect], ShapeGeometry]:
    angles = [math.radians(-90 + 360 * k / n) for k in range(n)]
    unit = [(0.5 + 0.5 * math.cos(a), 0.5 + 0.5 * math.sin(a)) for a in angles]

    def build(b: Rect) -> ShapeGeometry:
        return _polygon(b, unit)

    return build


STAR_INNER = {4: 0.4, 5: 0.4, 6: 0.5, 8: 0.55, 10: 0.6, 12: 0.65}


def _star(n: int) -> Callable[[Rect], ShapeGeometry]:
    inner = STAR_INNER[n]

    def build(b: Rect) -> ShapeGeometry:
        unit: list[FPoint] = []
        names: list[str | None] = []
        for k in range(2 * n):
            r = 0.5 if k % 2 == 0 else 0.5 * inner
            a = math.radians(-90 + 180 * k / n)
            unit.append((0.5 + r * math.cos(a), 0.5 + r * math.sin(a)))
            names.append(f"point{k // 2 + 1}" if k % 2 == 0 else None)
        return _polygon(b, unit, names)

    return build


RIGHT_ARROW = [(0, 0.25), (0.6, 0.25), (0.6, 0), (1, 0.5), (0.6, 1), (0.6, 0.75), (0, 0.75)]
ARROW_NAMES = ("tail_top", "neck_top", "head_top", "tip", "head_bottom", "neck_bottom", "tail_bottom")


def _arrow(transform: Callable[[float, float], FPoint]) -> Callable[[Rect], ShapeGeometry]:
    def build(b: Rect) -> ShapeGeometry:
        return _polygon(b, [transform(u, v) for u, v in RIGHT_ARROW], ARROW_NAMES)

    return build


def _double_arrow(b: Rect) -> ShapeGeometry:
    unit = [(0, 0.5), (0.25, 0), (0.25, 0.25), (0.75, 0.25), (0.75, 0), (1, 0.5),
            (0.75, 1), (0.75, 0.75), (0.25, 0.75), (0.25, 1)]  # fmt: skip
    names = ["left_tip", None, None, None, None, "right_tip", None, None, None, None]
    return _polygon(b, unit, names)


def _chevron(b: Rect) -> ShapeGeometry:
    return _polygon(b, [(0, 0), (0.7, 0), (1, 0.5), (0.7, 1), (0, 1), (0.3, 0.5)])


def _notched_arrow(b: Rect) -> ShapeGeometry:
    unit = [*RIGHT_ARROW, (0.15, 0.5)]
    return _polygon(b, unit, [*ARROW_NAMES, "notch"])


def _bent_arrow(b: Rect) -> ShapeGeometry:
    unit = [(0, 1), (0, 0.35), (0.65, 0.35), (0.65, 0.1), (1, 0.45), (0.65, 0.8), (0.65, 0.55), (0.2, 0.55), (0.2, 1)]
    names = ["foot_left", "corner", None, None, "tip", None, None, None, "foot_right"]
    return _polygon(b, unit, names)


def _u_turn_arrow(b: Rect) -> ShapeGeometry:
    unit = [(0, 1), (0, 0), (0.75, 0), (0.75, 0.6), (0.9, 0.6), (0.65, 1),
            (0.4, 0.6), (0.55, 0.6), (0.55, 0.2), (0.2, 0.2), (0.2, 1)]  # fmt: skip
    names = ["foot_left", "top_left", "top_right", None, None, "tip", None, None, None, None, "foot_right"]
    return _polygon(b, unit, names)


def _circular_arrow(b: Rect) -> ShapeGeometry:
    outer = _unit_arc(b, 0.5, 0.5, 0.45, 0.45, 180, 450, 37)
    inner = _unit_arc(b, 0.5, 0.5, 0.27, 0.27, 450, 180, 37)
    head_out = _unit_arc(b, 0.5, 0.5, 0.5, 0.5, 450, 450, 1)[0]
    tip = _unit_arc(b, 0.5, 0.5, 0.36, 0.36, 475, 475, 1)[0]
    head_in = _unit_arc(b, 0.5, 0.5, 0.2, 0.2, 450, 450, 1)[0]
    return _closed([*outer, head_out, tip, head_in, *inner], {"tip": tip})


def _line_geometry(path: list[FPoint], heads: list[tuple[FPoint, FPoint]] | None = None) -> ShapeGeometry:
    return ShapeGeometry(
        strokes=[(path, False)],
        endpoints={"start": path[0], "end": path[-1]},
        heads=heads or [],
    )


def _straight_line(b: Rect) -> ShapeGeometry:
    return _line_geometry([(b.x1, b.y1), (b.x2, b.y2)])


def _arrow_line(b: Rect) -> ShapeGeometry:
    start, end = (b.x1, b.y1), (b.x2, b.y2)
    return _line_geometry([start, end], [(end, start)])


def _double_arrow_line(b: Rect) -> ShapeGeometry:
    start, end = (b.x1, b.y1), (b.x2, b.y2)
    return _line_geometry([start, end], [(end, start), (start, end)])


def _curved_line(b: Rect) -> ShapeGeometry:
    path = _bezier(_at(b, 0, 1), _at(b, 0.25, -0.3), _at(b, 0.75, 1.3), _at(b, 1, 0))
    return _line_geometry(path)


def _elbow_connector(b: Rect) -> ShapeGeometry:
    mid = (b.x1 + b.x2) / 2
    geom = _line_geometry([(b.x1, b.y1), (mid, b.y1), (mid, b.y2), (b.x2, b.y2)])
    geom.vertices = {"bend1": (mid, b.y1), "bend2": (mid, b.y2)}
    return geom


def _arc_line(b: Rect) -> ShapeGeometry:
    return _line_geometry(_unit_arc(b, 0.5, 1, 0.5, 1, 180, 360, 37))


def _rect_callout(b: Rect) -> ShapeGeometry:
    unit = [(0, 0), (1, 0), (1, 0.75), (0.45, 0.75), (0.2, 1), (0.3, 0.75), (0, 0.75)]
    return _polygon(b, unit, ["top_left", "top_right", "bottom_right", None, "tail_tip", None, "bottom_left"])


def _rounded_callout(b: Rect) -> ShapeGeometry:
    bottom = b.y1 + 0.75 * b.height
    tl, tr, br, bl = _rounded_points(b.x1, b.y1, b.x2, bottom)
    tail = _at(b, 0.2, 1)
    pts = [*tl, *tr, *br, (_at(b, 0.45, 0)[0], bottom), tail, (_at(b, 0.3, 0)[0], bottom), *bl]
    return _closed(pts, {"tail_tip": tail})


CLOUD_LOBES = [(0.25, 0.6, 0.2), (0.45, 0.38, 0.25), (0.7, 0.42, 0.22), (0.78, 0.66, 0.2), (0.5, 0.7, 0.25)]


def _lobes(b: Rect, lobes: Sequence[tuple[float, float, float]]) -> list[tuple[list[FPoint], bool]]:
    return [(_unit_arc(b, cu, cv, r, r, 0, 360, 37)[:-1], False) for cu, cv, r in lobes]


def _cloud(b: Rect) -> ShapeGeometry:
    return ShapeGeometry(rings=_lobes(b, CLOUD_LOBES), strokes=None)


def _cloud_callout(b: Rect) -> ShapeGeometry:
    body = Rect(b.x1, b.y1, b.x2, b.y1 + 0.75 * b.height)
    bubbles = [(0.2, 0.85, 0.05), (0.1, 0.95, 0.035)]
    rings = _lobes(body, CLOUD_LOBES) + _lobes(b, bubbles)
    return ShapeGeometry(rings=rings, strokes=None, vertices={"tail_tip": _at(b, 0.1, 0.95)})


def _ribbon(b: Rect) -> ShapeGeometry:
    unit = [(0, 0.3), (0.2, 0.3), (0.2, 0.1), (0.8, 0.1), (0.8, 0.3), (1, 0.3), (0.9, 0.6),
            (1, 0.9), (0.7, 0.9), (0.7, 0.7), (0.3, 0.7), (0.3, 0.9), (0, 0.9), (0.1, 0.6)]  # fmt: skip
    return _polygon(b, unit)


def _banner(b: Rect) -> ShapeGeometry:
    return _polygon(b, [(0, 0), (1, 0), (0.9, 0.5), (1, 1), (0, 1), (0.1, 0.5)])


def _heart(b: Rect) -> ShapeGeometry:
    t = np.linspace(0, 2 * math.pi, CURVE_SAMPLES + 1)[:-1]
    xs = 16 * np.sin(t) ** 3
    ys = -(13 * np.cos(t) - 5 * np.cos(2 * t) - 2 * np.cos(3 * t) - np.cos(4 * t))
    us = (xs - xs.min()) / (xs.max() - xs.min())
    vs = (ys - ys.min()) / (ys.max() - ys.min())
    pts = [_at(b, u, v) for u, v in zip(us.tolist(), vs.tolist(), strict=True)]
    return _closed(pts, {"top_notch": pts[0], "bottom_tip": pts[CURVE_SAMPLES // 2]})


def _crescent(b: Rect) -> ShapeGeometry:
    outer = _unit_arc(b, 0.5, 0.5, 0.5, 0.5, 0, 360, CURVE_SAMPLES + 1)[:-1]
    bite = _unit_arc(b, 0.68, 0.42, 0.42, 0.42, 0, 360, CURVE_SAMPLES + 1)[:-1]
    return ShapeGeometry(rings=[(outer, False), (bite, True)], strokes=None)


def _sun(b: Rect) -> ShapeGeometry:
    rings = [(_unit_arc(b, 0.5, 0.5, 0.28, 0.28, 0, 360, 49)[:-1], False)]
    vertices: dict[str, FPoint] = {}
    for k in range(8):
        a = 45 * k - 90
        tip = _unit_arc(b, 0.5, 0.5, 0.5, 0.5, a, a, 1)[0]
        left = _unit_arc(b, 0.5, 0.5, 0.34, 0.34, a - 10, a - 10, 1)[0]
        right = _unit_arc(b, 0.5, 0.5, 0.34, 0.34, a + 10, a + 10, 1)[0]
        rings.append(([left, tip, right], False))
        vertices[f"ray{k + 1}"] = tip
    return ShapeGeometry(rings=rings, strokes=None, vertices=vertices)


def _frame(b: Rect) -> ShapeGeometry:
    t = 0.15 * min(b.width, b.height)
    outer = [(b.x1, b.y1), (b.x2, b.y1), (b.x2, b.y2), (b.x1, b.y2)]
    inner = [(b.x1 + t, b.y1 + t), (b.x2 - t, b.y1 + t), (b.x2 - t, b.y2 - t), (b.x1 + t, b.y2 - t)]
    vertices = dict(zip(CORNER_NAMES, outer, strict=True))
    vertices.update({f"inner_{n}": p for n, p in zip(CORNER_NAMES, inner, strict=True)})
    rings = [(outer, False), (inner, True)]
    return ShapeGeometry(rings=rings, strokes=[(outer, True), (inner, True)], vertices=vertices)


def _annulus(inner_ratio: float) -> Callable[[Rect], ShapeGeometry]:
    def build(b: Rect) -> ShapeGeometry:
        outer = _unit_arc(b, 0.5, 0.5, 0.5, 0.5, 0, 360, CURVE_SAMPLES + 1)[:-1]
        r = 0.5 * inner_ratio
        inner = _unit_arc(b, 0.5, 0.5, r, r, 0, 360, CURVE_SAMPLES + 1)[:-1]
        return ShapeGeometry(rings=[(outer, False), (inner, True)], strokes=[(outer, True), (inner, True)])

    return build


def _lightning(b: Rect) -> ShapeGeometry:
    return _polygon(b, [(0.55, 0), (0.15, 0.55), (0.45, 0.55), (0.3, 1), (0.85, 0.4), (0.55, 0.4), (0.75, 0)])


def _wave(b: Rect) -> ShapeGeometry:
    us = np.linspace(0, 1, 25).tolist()
    top = [_at(b, u, 0.15 - 0.15 * math.sin(2 * math.pi * u)) for u in us]
    bottom = [_at(b, u, 0.85 - 0.15 * math.sin(2 * math.pi * u)) for u in reversed(us)]
    vertices = {"top_left": top[0], "top_right": top[-1], "bottom_right": bottom[0], "bottom_left": bottom[-1]}
    return _closed(top + bottom, vertices)


def _pie(b: Rect) -> ShapeGeometry:
    apex = _at(b, 0.5, 0.5)
    arc = _unit_arc(b, 0.5, 0.5, 0.5, 0.5, 30, 330, 41)
    return _closed([apex, *arc], {"apex": apex, "arc_start": arc[0], "arc_end": arc[-1]})


def _sector(b: Rect) -> ShapeGeometry:
    apex = _at(b, 0.5, 1)
    arc = _unit_arc(b, 0.5, 1, 1, 1, 240, 300, 13)
    return _closed([apex, *arc], {"apex": apex, "arc_start": arc[0], "arc_end": arc[-1]})


def _drop(b: Rect) -> ShapeGeometry:
    tip = _at(b, 0.5, 0)
    reach = math.degrees(math.acos(0.38 / 0.62))
    arc = _unit_arc(b, 0.5, 0.62, 0.38, 0.38, -90 + reach, 270 - reach, 33)
    return _closed([tip, *arc], {"tip": tip})


def _teardrop(b: Rect) -> ShapeGeometry:
    corner = _at(b, 1, 0)
    arc = _unit_arc(b, 0.5, 0.5, 0.5, 0.5, 0, 270, 37)
    return _closed([*arc, corner], {"point": corner})


def _explosion(b: Rect) -> ShapeGeometry:
    outer = (0.5, 0.44, 0.5, 0.4, 0.48, 0.42, 0.5, 0.38, 0.47, 0.43, 0.5, 0.41)
    unit: list[FPoint] = []
    names: list[str | None] = []
    for k in range(24):
        r = outer[k // 2] if k % 2 == 0 else 0.3
        a = math.radians(-90 + 15 * k)
        unit.append((0.5 + r * math.cos(a), 0.5 + r * math.sin(a)))
        names.append(f"spike{k // 2 + 1}" if k % 2 == 0 else None)
    return _polygon(b, unit, names)


def _semicircle(b: Rect) -> ShapeGeometry:
    arc = _unit_arc(b, 0.5, 1, 0.5, 1, 180, 360, 37)
    return _closed(arc, {"left": arc[0], "right": arc[-1]})


def _quarter_circle(b: Rect) -> ShapeGeometry:
    corner = _at(b, 0, 1)
    arc = _unit_arc(b, 0, 1, 1, 1, 270, 360, 19)
    return _closed([corner, *arc], {"corner": corner, "arc_start": arc[0], "arc_end": arc[-1]})


def _shield(b: Rect) -> ShapeGeometry:
    tl, tr, tip = _at(b, 0, 0), _at(b, 1, 0), _at(b, 0.5, 1)
    right = _bezier(_at(b, 1, 0.5), _at(b, 1, 0.85), tip, n=12)
    left = _bezier(tip, _at(b, 0, 0.85), _at(b, 0, 0.5), n=12)
    return _closed([tl, tr, *right, *left[1:]], {"top_left": tl, "top_right": tr, "bottom_tip": tip})


def _l_shape(b: Rect) -> ShapeGeometry:
    return _polygon(b, [(0, 0), (0.4, 0), (0.4, 0.6), (1, 0.6), (1, 1), (0, 1)])


def _t_shape(b: Rect) -> ShapeGeometry:
    return _polygon(b, [(0, 0), (1, 0), (1, 0.35), (0.65, 0.35), (0.65, 1), (0.35, 1), (0.35, 0.35), (0, 0.35)])


def _fixed(unit: Sequence[FPoint], names: Sequence[str]) -> Callable[[Rect], ShapeGeometry]:
    return lambda b: _polygon(b, unit, names)


_REGISTRY: list[tuple[str, Category, str | None, Callable[[Rect], ShapeGeometry], dict]] = [
    ("rectangle", "rectangles", None, _rectangle, {"common": True}),
    ("rounded_rectangle", "rectangles", None, _rounded_rectangle, {}),
    ("square", "rectangles", None, _rectangle, {"square": True}),
    ("rounded_square", "rectangles", None, _rounded_rectangle, {"square": True}),
    ("cross", "rectangles", None, _cross, {}),
    ("plus", "rectangles", "plus sign", _plus, {}),
    ("ellipse", "ellipses", None, _ellipse, {}),
    ("circle", "ellipses", None, _ellipse, {"square": True, "common": True}),
    ("scalene_triangle", "triangles", None,
     _fixed([(0.3, 0), (1, 1), (0, 0.85)], ("top", "bottom_right", "left")), {"common": True}),
    ("right_triangle", "triangles", None,
     _fixed([(0, 0), (1, 1), (0, 1)], ("top", "bottom_right", "right_angle")), {"common": True}),
    ("isosceles_triangle", "triangles", None,
     _fixed([(0.5, 0), (1, 1), (0, 1)], ("apex", "bottom_right", "bottom_left")), {"common": True}),
    ("equilateral_triangle", "triangles", None, _equilateral, {"common": True}),
    ("obtuse_triangle", "triangles", None,
     _fixed([(0, 0), (1, 1), (0.35, 1)], ("top", "bottom_right", "obtuse_corner")), {"common": True}),
    ("diamond", "quadrilaterals", None,
     _fixed([(0.5, 0), (1, 0.5), (0.5, 1), (0, 0.5)], ("top", "right", "bottom", "left")), {"common": True}),
    ("parallelogram", "quadrilaterals", None,
     _fixed([(0.25, 0), (1, 0), (0.75, 1), (0, 1)], CORNER_NAMES), {}),
    ("trapezoid", "quadrilaterals", None,
     _fixed([(0.25, 0), (0.75, 0), (1, 1), (0, 1)], CORNER_NAMES), {}),
    ("right_trapezoid", "quadrilaterals", None,
     _fixed([(0, 0), (0.6, 0), (1, 1), (0, 1)], CORNER_NAMES), {}),
    ("kite", "quadrilaterals", None,
     _fixed([(0.5, 0), (1, 0.35), (0.5, 1), (0, 0.35)], ("top", "right", "bottom", "left")), {}),
    ("pentagon", "polygons", None, _regular(5), {}),
    ("hexagon", "polygons", None, _regular(6), {}),
    ("heptagon", "polygons", None, _regular(7), {}),
    ("octagon", "polygons", None, _regular(8), {}),
    ("nonagon", "polygons", None, _regular(9), {}),
    ("decagon", "polygons", None, _regular(10), {}),
    ("star4", "stars", "4-point star", _star(4), {}),
    ("star5", "stars", "5-point star", _star(5), {"common": True}),
    ("star6", "stars", "6-point star", _star(6), {}),
    ("star8", "stars", "8-point star", _star(8), {}),
    ("star10", "stars", "10-point star", _star(10), {}),
    ("star12", "stars", "12-point star", _star(12), {}),
    ("right_arrow", "arrows", None, _arrow(lambda u, v: (u, v)), {"common": True}),
    ("left_arrow", "arrows", None, _arrow(lambda u, v: (1 - u, v)), {"common": True}),
    ("up_arrow", "arrows", None, _arrow(lambda u, v: (v, 1 - u)), {"common": True}),
    ("down_arrow", "arrows", None, _arrow(lambda u, v: (v, u)), {"common": True}),
    ("double_arrow", "arrows", "double-headed arrow", _double_arrow, {}),
    ("chevron", "arrows", None, _chevron, {}),
    ("notched_arrow", "arrows", "notched right arrow", _notched_arrow, {}),
    ("bent_arrow", "arrows", None, _bent_arrow, {}),
    ("u_turn_arrow", "arrows", "U-turn arrow", _u_turn_arrow, {}),
    ("circular_arrow", "arrows", None, _circular_arrow, {}),
    ("straight_line", "lines", None, _straight_line, {"line_like": True}),
    ("arrow_line", "lines", "single-arrow line", _arrow_line, {"line_like": True}),
    ("double_arrow_line", "lines", "double-arrow line", _double_arrow_line, {"line_like": True}),
    ("curved_line", "lines", None, _curved_line, {"line_like": True}),
    ("elbow_connector", "lines", None, _elbow_connector, {"line_like": True}),
    ("rectangular_callout", "callouts", None, _rect_callout, {}),
    ("rounded_callout", "callouts", "rounded rectangular callout", _rounded_callout, {}),
    ("cloud_callout", "callouts", None, _cloud_callout, {}),
    ("ribbon", "callouts", None, _ribbon, {}),
    ("banner", "callouts", None, _banner, {}),
    ("heart", "special", None, _heart, {}),
    ("cloud", "special", None, _cloud, {}),
    ("crescent_moon", "special", None, _crescent, {}),
    ("sun", "special", None, _sun, {}),
    ("frame", "special", None, _frame, {}),
    ("donut", "special", None, _annulus(0.5), {"square": True}),
    ("ring", "special", None, _annulus(0.8), {"square": True}),
    ("lightning_bolt", "special", None, _lightning, {}),
    ("wave", "special", None, _wave, {}),
    ("arc", "special", None, _arc_line, {"line_like": True}),
    ("pie", "special", None, _pie, {}),
    ("sector", "special", None, _sector, {}),
    ("drop", "special", None, _drop, {}),
    ("explosion", "special", None, _explosion, {}),
    ("semicircle", "special", None, _semicircle, {}),
    ("quarter_circle", "special", None, _quarter_circle, {}),
    ("teardrop", "special", None, _teardrop, {}),
    ("shield", "special", None, _shield, {}),
    ("l_shape", "special", "L-shape", _l_shape, {}),
    ("t_shape", "special", "T-shape", _t_shape, {}),
    ("bordered_textbox", "text-boxes", "bordered text box", _rectangle, {}),
    ("rounded_textbox", "text-boxes", "rounded-border text box", _rounded_rectangle, {}),
    ("borderless_textbox", "text-boxes", "borderless text box", _borderless, {"stroked": False}),
]  # fmt: skip

for _name, _category, _label, _builder, _flags in _REGISTRY:
    SHAPES[_name] = ShapeKind(_name, _category, _label or _name.replace("_", " "), _builder, **_flags)

SHAPE_COUNT = len(SHAPES)
SQUARE_KINDS = frozenset(k.name for k in SHAPES.values() if k.square)
LINE_KINDS = frozenset(k.name for k in SHAPES.values() if k.line_like)
COMMON_KINDS = frozenset(k.name for k in SHAPES.values() if k.common)
DENSE_CURVE_KINDS = frozenset({"heart", "cloud", "crescent_moon", "wave"})


def _ipt(p: FPoint) -> tuple[int, int]:
    return (int(round(p[0])), int(round(p[1])))


def _ring_mask(rings: list[tuple[list[tuple[int, int]], bool]], pad: int) -> tuple[Image.Image, int, int]:
    xs = [x for pts, hole in rings if not hole for x, _ in pts]
    ys = [y for pts, hole in rings if not hole for _, y in pts]
    ox, oy = min(xs) - pad, min(ys) - pad
    mask = Image.new("L", (max(xs) - ox + pad + 1, max(ys) - oy + pad + 1), 0)
    draw = ImageDraw.Draw(mask)
    for pts, hole in sorted(rings, key=lambda r: r[1]):
        draw.polygon([(x - ox, y - oy) for x, y in pts], fill=0 if hole else 255)
    return mask, ox, oy


def _traced_outline(mask: Image.Image, ox: int, oy: int) -> list[tuple[list[tuple[int, int]], bool]]:
    contours, _ = cv2.findContours((np.asarray(mask) > 0).astype(np.uint8), cv2.RETR_LIST, cv2.CHAIN_APPROX_SIMPLE)
    return [([(int(x) + ox, int(y) + oy) for x, y in c.reshape(-1, 2)], True) for c in contours]


def _dashed(draw: ImageDraw.ImageDraw, path: list[tuple[int, int]], color: Rgb, width: int) -> None:
    dash, gap = max(4, 3 * width), max(3, 2 * width)
    on, remaining = True, float(dash)
    for (x0, y0), (x1, y1) in zip(path, path[1:], strict=False):
        seg = math.hypot(x1 - x0, y1 - y0)
        pos = 0.0
        while pos < seg:
            step = min(remaining, seg - pos)
            if on:
                a, c = pos / seg, (pos + step) / seg
                draw.line(
                    [(x0 + (x1 - x0) * a, y0 + (y1 - y0) * a), (x0 + (x1 - x0) * c, y0 + (y1 - y0) * c)],
                    fill=tuple(color),
                    width=width,
                )
            pos += step
            remaining -= step
            if remaining <= 0:
                on = not on
                remaining = float(dash if on else gap)


def stroke_path(
    draw: ImageDraw.ImageDraw, path: list[tuple[int, int]], closed: bool, color: Rgb, width: int, line_style: LineStyle
) -> None:
    """Draw a polyline; the dashed variant carries its phase across segments."""
    pts = [*path, path[0]] if closed and len(path) > 2 else list(path)
    if len(pts) < 2:
        return
    if line_style == "dashed":
        _dashed(draw, pts, color, width)
    else:
        draw.line(pts, fill=tuple(color), width=width, joint="curve")


def _arrowhead(tip: tuple[int, int], origin: tuple[int, int], size: int) -> list[tuple[int, int]]:
    dx, dy = tip[0] - origin[0], tip[1] - origin[1]
    length = math.hypot(dx, dy) or 1.0
    ux, uy = dx / length, dy / length
    bx, by = tip[0] - ux * size, tip[1] - uy * size
    half = size * 0.6
    return [tip, _ipt((bx - uy * half, by + ux * half)), _ipt((bx + uy * half, by - ux * half))]


def _even_box(x1: int, y1: int, x2: int, y2: int, width: int, height: int) -> Rect:
    if (x2 - x1) % 2:
        if x2 + 1 <= width:
            x2 += 1
        else:
            x1 -= 1
    if (y2 - y1) % 2:
        if y2 + 1 <= height:
            y2 += 1
        else:
            y1 -= 1
    return Rect(x1, y1, x2, y2)


def _flip(geom: ShapeGeometry, b: Rect) -> ShapeGeometry:
    """Mirror the geometry left-right inside its box."""
    axis = b.x1 + b.x2

    def f(p: FPoint) -> FPoint:
        return (axis - p[0], p[1])

    return ShapeGeometry(
        rings=[([f(p) for p in pts], hole) for pts, hole in geom.rings],
        strokes=None if geom.strokes is None else [([f(p) for p in pts], c) for pts, c in geom.strokes],
        vertices={name: f(p) for name, p in geom.vertices.items()},
        endpoints={name: f(p) for name, p in geom.endpoints.items()},
        heads=[(f(tip), f(origin)) for tip, origin in geom.heads],
    )


def _geometry(kind_info: ShapeKind, box: Rect, flipped: bool) -> ShapeGeometry:
    b = Rect(int(round(box.x1)), int(round(box.y1)), int(round(box.x2)), int(round(box.y2)))
    geom = kind_info.builder(b)
    return _flip(geom, b) if flipped else geom


def _head_size(stroke_width: int) -> int:
    return max(ARROWHEAD_MIN, 3 * stroke_width)


def shape_extent(kind: str | ShapeKind, box: Rect, stroke_width: int = 1, *, flipped: bool = False) -> Rect:
    """The extent ``rasterize_shape`` draws for ``box``, computed without drawing.

    Outlines traced from a fill mask are approximated by the fill rings, so the
    rasterized bbox may differ by a pixel or two.
    """
    geom = _geometry(get_kind(kind), box, flipped)
    pts = [_ipt(p) for pts, _ in geom.strokes or [] for p in pts]
    pts.extend(_ipt(p) for pts, hole in geom.rings if not hole for p in pts)
    for tip, origin in geom.heads:
        pts.extend(_arrowhead(_ipt(tip), _ipt(origin), _head_size(stroke_width)))
    pts.extend(_ipt(p) for p in geom.vertices.values())
    pts.extend(_ipt(p) for p in geom.endpoints.values())
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return Rect(min(xs), min(ys), max(max(xs), min(xs) + 1), max(max(ys), min(ys) + 1))


def rasterize_shape(
    canvas: Image.Image, kind: str | ShapeKind, box: Rect, style: Style, *, flipped: bool = False
) -> ShapeResult:
    """Draw one shape into ``canvas`` and return its geometry.

    The returned bbox is the tight extent of the drawn geometry, snapped to even
    width and height so the center and edge midpoints are integers. ``flipped``
    mirrors the shape left-right inside ``box``.
    """
    kind_info = get_kind(kind)
    geom = _geometry(kind_info, box, flipped)

    rings = [([_ipt(p) for p in pts], hole) for pts, hole in geom.rings]
    draw = ImageDraw.Draw(canvas)

    mask = None
    if rings:
        mask, ox, oy = _ring_mask(rings, pad=2)
        if style.fill is not None:
            canvas.paste(tuple(style.fill), (ox, oy), mask)

    if geom.strokes is None:
        strokes = _traced_outline(mask, ox, oy) if mask is not None else []
    else:
        strokes = [([_ipt(p) for p in pts], closed) for pts, closed in geom.strokes]
    if kind_info.stroked:
        for path, closed in strokes:
            stroke_path(draw, path, closed, style.outline, style.stroke_width, style.line_style)

    extent = [p for pts, _ in strokes for p in pts]
    if geom.strokes is not None:
        extent.extend(p for pts, hole in rings if not hole for p in pts)
    head_size = _head_size(style.stroke_width)
    for tip, origin in geom.heads:
        tri = _arrowhead(_ipt(tip), _ipt(origin), head_size)
        draw.polygon(tri, fill=tuple(style.outline))
        extent.extend(tri)

    vertices = {name: Point(*_ipt(p)) for name, p in geom.vertices.items()}
    endpoints = {name: Point(*_ipt(p)) for name, p in geom.endpoints.items()}
    extent.extend(vertices.values())
    extent.extend(endpoints.values())

    xs = [int(p[0]) for p in extent]
    ys = [int(p[1]) for p in extent]
    bbox = _even_box(min(xs), min(ys), max(xs), max(ys), canvas.width, canvas.height)
    center = Point((bbox.x1 + bbox.x2) // 2, (bbox.y1 + bbox.y2) // 2)
    return ShapeResult(bbox=bbox, center=center, vertices=vertices, endpoints=endpoints)
