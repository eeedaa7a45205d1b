"""Geometric and colorimetric primitives: hit tests, overlap, redmean distance, HSV sampling."""

from __future__ import annotations

import colorsys
import logging
import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from actsynth.errors import GeometryError

logger = logging.getLogger(__name__)

DEFAULT_SATURATION_RANGE = (0.25, 1.0)
DEFAULT_VALUE_RANGE = (0.25, 1.0)
COLOR_TRIALS = 1000
EDGE_EPSILON = 1e-9


class Point(NamedTuple):
    x: float
    y: float


class Rgb(NamedTuple):
    r: int
    g: int
    b: int

    @classmethod
    def parse(cls, value: Sequence[int]) -> Rgb:
        """Build an Rgb from a 3-item sequence, validating channel bounds."""
        if len(value) != 3:
            raise GeometryError(f"RGB value needs 3 channels, got {len(value)}")
        channels = []
        for channel in value:
            if isinstance(channel, bool) or not isinstance(channel, int) or not 0 <= channel <= 255:
                raise GeometryError(f"RGB channel out of range: {channel!r}")
            channels.append(channel)
        return cls(*channels)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in pixel space."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise GeometryError(f"Inverted rect {self.as_list()}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Point:
        return Point((self.x1 + self.x2) / 2, (self.y1 + self.y2) / 2)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]

    def as_polygon(self) -> Polygon:
        return Polygon(
            (
                Point(self.x1, self.y1),
                Point(self.x2, self.y1),
                Point(self.x2, self.y2),
                Point(self.x1, self.y2),
            )
        )

    def dilate(self, margin: float) -> Rect:
        return Rect(self.x1 - margin, self.y1 - margin, self.x2 + margin, self.y2 + margin)

    def clip(self, width: float, height: float) -> Rect:
        return Rect(
            min(max(self.x1, 0), width),
            min(max(self.y1, 0), height),
            min(max(self.x2, 0), width),
            min(max(self.y2, 0), height),
        )

    def within(self, width: float, height: float) -> bool:
        return self.x1 >= 0 and self.y1 >= 0 and self.x2 <= width and self.y2 <= height

    @classmethod
    def around(cls, p: Point, radius: float) -> Rect:
        return cls(p.x - radius, p.y - radius, p.x + radius, p.y + radius)

    @classmethod
    def bounding(cls, points: Iterable[Point]) -> Rect:
        pts = list(points)
        if not pts:
            raise GeometryError("Cannot bound an empty point set")
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        return cls(min(xs), min(ys), max(xs), max(ys))


@dataclass(frozen=True)
class Polygon:
    """Closed polygon; consecutive duplicate vertices are dropped on construction."""

    vertices: tuple[Point, ...]

    def __post_init__(self) -> None:
        cleaned: list[Point] = []
        for v in self.vertices:
            p = Point(v[0], v[1])
            if not cleaned or cleaned[-1] != p:
                cleaned.append(p)
        while len(cleaned) > 1 and cleaned[0] == cleaned[-1]:
            cleaned.pop()
        if len(cleaned) < 3:
            raise GeometryError(f"Polygon needs at least 3 distinct vertices, got {len(cleaned)}")
        object.__setattr__(self, "vertices", tuple(cleaned))

    def bounds(self) -> Rect:
        return Rect.bounding(self.vertices)

    def as_list(self) -> list[list[float]]:
        return [[v.x, v.y] for v in self.vertices]


def polygon_area(poly: Polygon) -> float:
    """Unsigned shoelace area."""
    total = 0.0
    verts = poly.vertices
    for i, a in enumerate(verts):
        b = verts[(i + 1) % len(verts)]
        total += a.x * b.y - b.x * a.y
    return abs(total) / 2


def validate_polygon(poly: Polygon) -> Polygon:
    """Reject zero-area polygons; used when loading regions."""
    if polygon_area(poly) <= 0:
        raise GeometryError(f"Degenerate polygon with zero area: {poly.as_list()}")
    return poly


def point_in_rect(p: Point, r: Rect) -> bool:
    return r.x1 <= p[0] <= r.x2 and r.y1 <= p[1] <= r.y2


def _on_segment(p: Point, a: Point, b: Point) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
    if abs(cross) > EDGE_EPSILON * max(1.0, abs(b[0] - a[0]) + abs(b[1] - a[1])):
        return False
    return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])


def point_in_polygon(p: Point, poly: Polygon) -> bool:
    """Even-odd crossing test; points on an edge count as inside."""
    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        if _on_segment(p, verts[i], verts[(i + 1) % n]):
            return True

    inside = False
    px, py = p[0], p[1]
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        if (ay <= py < by) or (by <= py < ay):
            t = (py - ay) / (by - ay)
            if px < ax + t * (bx - ax):
                inside = not inside
    return inside


def overlap_ratio(a: Rect, b: Rect) -> float:
    """Intersection area over the smaller of the two areas."""
    smaller = min(a.area, b.area)
    if smaller <= 0:
        raise GeometryError(f"overlap_ratio needs positive areas, got {a.as_list()} and {b.as_list()}")
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0 or h <= 0:
        return 0.0
    return (w * h) / smaller


def redmean_distance(c1: Sequence[int], c2: Sequence[int]) -> float:
    """Redmean-weighted RGB distance (divisor 256 form)."""
    rmean = (c1[0] + c2[0]) / 2
    dr = c1[0] - c2[0]
    dg = c1[1] - c2[1]
    db = c1[2] - c2[2]
    return math.sqrt((2 + rmean / 256) * dr * dr + 4 * dg * dg + (2 + (255 - rmean) / 256) * db * db)


def hsv_to_rgb(h: float, s: float, v: float) -> Rgb:
    """h in degrees [0,360), s and v in [0,1]."""
    r, g, b = colorsys.hsv_to_rgb((h % 360) / 360, s, v)
    return Rgb(round(r * 255), round(g * 255), round(b * 255))


class SampledColor(NamedTuple):
    color: Rgb
    flagged: bool


def sample_color_hsv(
    rng: random.Random,
    min_dist_against: Sequence[tuple[Sequence[int], float]] = (),
    *,
    saturation_range: tuple[float, float] = DEFAULT_SATURATION_RANGE,
    value_range: tuple[float, float] = DEFAULT_VALUE_RANGE,
    max_trials: int = COLOR_TRIALS,
) -> SampledColor:
    """Draw a color in HSV, rejecting candidates closer than each constraint's distance.

    After ``max_trials`` rejections the candidate with the largest worst-case slack is
    returned with ``flagged=True``.
    """
    best: Rgb | None = None
    best_slack = -math.inf
    for _ in range(max_trials):
        color = hsv_to_rgb(
            rng.uniform(0.0, 360.0),
            rng.uniform(*saturation_range),
            rng.uniform(*value_range),
        )
        if not min_dist_against:
            return SampledColor(color, False)
        slack = min(redmean_distance(color, other) - dist for other, dist in min_dist_against)
        if slack >= 0:
            return SampledColor(color, False)
        if slack > best_slack:
            best, best_slack = color, slack

    assert best is not None
    logger.debug("color sampling fell back after %d trials (slack %.1f)", max_trials, best_slack)
    return SampledColor(best, True)
