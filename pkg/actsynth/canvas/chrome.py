"""Slide-editor selection chrome drawn over rasterized shapes."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from PIL import Image, ImageDraw

from actsynth.canvas.shapes import DENSE_CURVE_KINDS, ShapeKind, ShapeResult, get_kind
from actsynth.geometry import Point, Rect

BOX_COLOR = (128, 128, 128)
CONTROL_COLOR = (230, 30, 30)
MARKER_COLOR = (40, 90, 230)
HANDLE_COLOR = (90, 90, 90)

CONTROL_RADIUS = 4
MARKER_RADIUS = 5
HANDLE_CONNECTOR = 20
HANDLE_RADIUS = 9
HANDLE_SWEEP = 300
HANDLE_ARROWHEAD = 4

BOX_POINT_NAMES = (
    "top_left",
    "top_center",
    "top_right",
    "right_center",
    "bottom_right",
    "bottom_center",
    "bottom_left",
    "left_center",
)
# outward normal of each edge midpoint
ANCHOR_NORMALS = {
    "top_center": (0, -1),
    "right_center": (1, 0),
    "bottom_center": (0, 1),
    "left_center": (-1, 0),
}


@dataclass
class ChromeAnnotation:
    box_points: dict[str, Point]
    vertex_markers: list[Point] = field(default_factory=list)
    rotation_handle_center: Point = Point(0, 0)
    rotation_anchor: str = "top_center"


def box_points(bbox: Rect) -> dict[str, Point]:
    """Corners and edge midpoints of ``bbox``, keyed clockwise from top-left."""
    cx, cy = (bbox.x1 + bbox.x2) // 2, (bbox.y1 + bbox.y2) // 2
    coords = (
        (bbox.x1, bbox.y1),
        (cx, bbox.y1),
        (bbox.x2, bbox.y1),
        (bbox.x2, cy),
        (bbox.x2, bbox.y2),
        (cx, bbox.y2),
        (bbox.x1, bbox.y2),
        (bbox.x1, cy),
    )
    return {name: Point(int(x), int(y)) for name, (x, y) in zip(BOX_POINT_NAMES, coords, strict=True)}


def _dot(draw: ImageDraw.ImageDraw, p: Point, radius: int, color: tuple[int, int, int]) -> None:
    draw.ellipse([p.x - radius, p.y - radius, p.x + radius, p.y + radius], fill=color, outline=(255, 255, 255))


def _diamond(draw: ImageDraw.ImageDraw, p: Point, radius: int, color: tuple[int, int, int]) -> None:
    draw.polygon(
        [(p.x, p.y - radius), (p.x + radius, p.y), (p.x, p.y + radius), (p.x - radius, p.y)],
        fill=color,
        outline=(255, 255, 255),
    )


def _rotation_handle(draw: ImageDraw.ImageDraw, anchor: Point, normal: tuple[int, int]) -> Point:
    nx, ny = normal
    joint = (anchor.x + nx * HANDLE_CONNECTOR, anchor.y + ny * HANDLE_CONNECTOR)
    center = Point(joint[0] + nx * HANDLE_RADIUS, joint[1] + ny * HANDLE_RADIUS)
    draw.line([anchor, joint], fill=HANDLE_COLOR, width=1)

    # the gap of the arc faces the connector
    start = math.degrees(math.atan2(-ny, -nx)) + (360 - HANDLE_SWEEP) / 2
    steps = 30
    arc = [
        (
            center.x + HANDLE_RADIUS * math.cos(math.radians(start + HANDLE_SWEEP * k / steps)),
            center.y + HANDLE_RADIUS * math.sin(math.radians(start + HANDLE_SWEEP * k / steps)),
        )
        for k in range(steps + 1)
    ]
    draw.line(arc, fill=HANDLE_COLOR, width=2)

    end_angle = math.radians(start + HANDLE_SWEEP)
    tip = arc[-1]
    tx, ty = -math.sin(end_angle), math.cos(end_angle)
    base = (tip[0] - tx * HANDLE_ARROWHEAD, tip[1] - ty * HANDLE_ARROWHEAD)
    draw.polygon(
        [
            (tip[0] + tx * HANDLE_ARROWHEAD, tip[1] + ty * HANDLE_ARROWHEAD),
            (base[0] - ty * HANDLE_ARROWHEAD, base[1] + tx * HANDLE_ARROWHEAD),
            (base[0] + ty * HANDLE_ARROWHEAD, base[1] - tx * HANDLE_ARROWHEAD),
        ],
        fill=HANDLE_COLOR,
    )
    return center


def draw_chrome(
    canvas: Image.Image, result: ShapeResult, kind: str | ShapeKind, rng: random.Random
) -> ChromeAnnotation:
    """Overlay selection chrome for one element and record every marker position.

    Line-like kinds get their two endpoints as control points instead of the
    eight box points. The rotation handle hangs off one of the four edge
    midpoints, chosen with ``rng``.
    """
    kind_info = get_kind(kind)
    draw = ImageDraw.Draw(canvas)
    bbox = result.bbox
    draw.rectangle([bbox.x1, bbox.y1, bbox.x2, bbox.y2], outline=BOX_COLOR, width=1)

    corners = box_points(bbox)
    if kind_info.line_like:
        controls = {name: result.endpoints[name] for name in ("start", "end")}
    else:
        controls = corners
    for p in controls.values():
        _dot(draw, p, CONTROL_RADIUS, CONTROL_COLOR)

    markers: list[Point] = []
    if kind_info.name not in DENSE_CURVE_KINDS:
        markers = list(result.vertices.values())
        for p in markers:
            _diamond(draw, p, MARKER_RADIUS, MARKER_COLOR)

    anchor = rng.choice(sorted(ANCHOR_NORMALS))
    center = _rotation_handle(draw, corners[anchor], ANCHOR_NORMALS[anchor])
    return ChromeAnnotation(
        box_points=controls,
        vertex_markers=markers,
        rotation_handle_center=Point(int(center.x), int(center.y)),
        rotation_anchor=anchor,
    )
