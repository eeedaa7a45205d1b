"""Grounding targets for natural-image regions given as binary masks.

Coordinates follow pixel indexing: a contour point (x, y) is the foreground
pixel in column x and row y, and a bbox spans ``[min, max + 1)`` so a
full-frame mask's bbox equals the image bounds.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NamedTuple

import cv2
import numpy as np
from PIL import Image, ImageDraw

from actsynth.errors import AnnotationError, GeometryError
from actsynth.geometry import Point, Polygon, Rect, point_in_polygon

logger = logging.getLogger(__name__)

BOUNDARY_POINTS = 20
OVERLAY_COLORS = ((230, 25, 75), (60, 180, 75), (0, 130, 200), (245, 130, 48), (145, 30, 180))
OVERLAY_WIDTH = 3

Loop = list[Point]


def _binary(mask: np.ndarray | Image.Image) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise GeometryError(f"Mask must be single-channel, got shape {arr.shape}")
    binary = (arr > 0).astype(np.uint8)
    if not binary.any():
        raise GeometryError("Mask has no foreground pixels")
    return binary


def extract_outer_contour(mask: np.ndarray | Image.Image) -> list[Loop]:
    """Outer border loop of every 8-connected component, largest component first.

    Border following is OpenCV's Suzuki-Abe implementation; holes are ignored.
    """
    binary = _binary(mask)
    count, labels, stats, _ = cv2.connectedComponentsWithStats(binary, connectivity=8)
    order = sorted(
        range(1, count),
        key=lambda k: (-stats[k, cv2.CC_STAT_AREA], stats[k, cv2.CC_STAT_TOP], stats[k, cv2.CC_STAT_LEFT]),
    )
    loops = []
    for k in order:
        component = (labels == k).astype(np.uint8)
        contours, _ = cv2.findContours(component, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
        outer = max(contours, key=len)
        loops.append([Point(int(x), int(y)) for x, y in outer.reshape(-1, 2)])
    return loops


def _canonical_start(loop: Sequence[Point]) -> list[Point]:
    """Rotate the loop to begin at its topmost-then-leftmost point."""
    start = min(range(len(loop)), key=lambda i: (loop[i][1], loop[i][0]))
    return list(loop[start:]) + list(loop[:start])


class BoundarySample(NamedTuple):
    points: tuple[Point, ...]
    flagged: bool

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.points)


def sample_boundary(loop: Sequence[Point], k: int = BOUNDARY_POINTS) -> BoundarySample:
    """Pick ``k`` loop points at near-equal arc-length spacing, in loop order.

    A loop shorter than ``k`` comes back whole and flagged.
    """
    if k < 3:
        raise GeometryError(f"Boundary needs at least 3 points, got k={k}")
    if not loop:
        raise GeometryError("Cannot sample an empty contour")
    pts = _canonical_start(loop)
    n = len(pts)
    if n <= k:
        return BoundarySample(tuple(pts), n < k)

    xy = np.asarray(pts, dtype=float)
    steps = np.hypot(*(np.roll(xy, -1, axis=0) - xy).T)
    arc = np.concatenate([[0.0], np.cumsum(steps)[:-1]])
    targets = np.arange(k) * (steps.sum() / k)
    nearest = np.abs(arc[None, :] - targets[:, None]).argmin(axis=1)

    chosen: list[int] = []
    for j, idx in enumerate(nearest.tolist()):
        lo = chosen[-1] + 1 if chosen else 0
        hi = n - (k - j)
        chosen.append(min(max(idx, lo), hi))
    return BoundarySample(tuple(pts[i] for i in chosen), False)


def zigzag_trail(points: Sequence[Point]) -> list[Point]:
    """Reorder boundary points as p1, p2, pN, p3, pN-1, ... for a sweeping mask stroke."""
    n = len(points)
    if n < 3:
        return list(points)
    order = [0]
    head, tail = 1, n - 1
    take_head = True
    while head <= tail:
        if take_head:
            order.append(head)
            head += 1
        else:
            order.append(tail)
            tail -= 1
        take_head = not take_head
    return [points[i] for i in order]


def trail_stroke_width(bbox: Rect, k: int = BOUNDARY_POINTS) -> float:
    """Brush width that lets the zig-zag trail sweep a convex region."""
    return bbox.height / (k / 2)


@dataclass
class RegionAnnotation:
    id: str
    caption: str
    bbox: Rect
    center: Point
    boundary: tuple[Point, ...]
    click_point: Point
    flagged: bool = False

    @property
    def polygon(self) -> Polygon | None:
        try:
            return Polygon(self.boundary)
        except GeometryError:
            return None


def _interior_point(binary: np.ndarray, center: Point, polygon: Polygon | None) -> Point:
    h, w = binary.shape
    on_mask = binary[min(int(center.y), h - 1), min(int(center.x), w - 1)] > 0
    if on_mask and polygon is not None and point_in_polygon(center, polygon):
        return center
    dist = cv2.distanceTransform(binary, cv2.DIST_L2, 5)
    y, x = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return Point(int(x), int(y))


def build_region(
    mask: np.ndarray | Image.Image, caption: str, region_id: str, k: int = BOUNDARY_POINTS
) -> RegionAnnotation:
    """Bbox, center, sampled boundary and a click point for one mask."""
    binary = _binary(mask)
    ys, xs = np.nonzero(binary)
    bbox = Rect(int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
    center = bbox.center
    sample = sample_boundary(extract_outer_contour(binary)[0], k)
    if sample.flagged:
        logger.debug("region %s: contour has %d points, fewer than %d", region_id, len(sample.points), k)
    region = RegionAnnotation(region_id, caption, bbox, center, sample.points, center, sample.flagged)
    region.click_point = _interior_point(binary, center, region.polygon)
    return region


def region_to_dict(region: RegionAnnotation) -> dict[str, Any]:
    return {
        "id": region.id,
        "caption": region.caption,
        "bbox": region.bbox.as_list(),
        "center": list(region.center),
        "boundary": [list(p) for p in region.boundary],
        "click_point": list(region.click_point),
        "flagged": region.flagged,
    }


# -- mask inputs


def load_mask(path: Path) -> np.ndarray:
    """A 1-channel 0/255 PNG mask as a boolean array."""
    with Image.open(path) as im:
        if im.mode not in ("L", "1", "P"):
            raise AnnotationError(f"{path}: mask must be single-channel, got mode {im.mode}")
        return np.asarray(im.convert("L")) > 0


def decode_rle(obj: dict[str, Any]) -> np.ndarray:
    """Uncompressed column-major run-length mask; runs alternate 0s and 1s, starting with 0s."""
    try:
        h, w = (int(v) for v in obj["size"])
        counts = [int(c) for c in obj["counts"]]
    except (KeyError, TypeError, ValueError) as e:
        raise AnnotationError(f"Malformed run-length mask: {e}") from e
    if sum(counts) != h * w:
        raise AnnotationError(f"Run lengths sum to {sum(counts)}, expected {h * w}")
    values = np.repeat(np.arange(len(counts)) % 2, counts).astype(bool)
    return values.reshape((w, h)).T


@dataclass
class ImageSource:
    image: Path
    regions: list[tuple[str, str, np.ndarray]]


def load_image_source(path: Path) -> list[ImageSource]:
    """Read a caption sidecar; each region's mask is a PNG path or a run-length object."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise AnnotationError(f"Cannot read image source {path}: {e}") from e

    if not isinstance(doc, dict) or not isinstance(doc.get("images", []), list):
        raise AnnotationError(f"{path}: expected an object with an 'images' list")

    sources = []
    for i, entry in enumerate(doc.get("images", [])):
        where = f"images[{i}]"
        try:
            regions = []
            for j, item in enumerate(entry.get("regions", [])):
                where = f"images[{i}].regions[{j}]"
                mask = item["mask"]
                array = decode_rle(mask) if isinstance(mask, dict) else load_mask(path.parent / mask)
                regions.append((str(item["id"]), str(item["caption"]), array))
            where = f"images[{i}]"
            sources.append(ImageSource(path.parent / entry["image"], regions))
        except (KeyError, TypeError, AttributeError) as e:
            raise AnnotationError(f"{where}: malformed entry, missing or invalid {e}") from e
    return sources


def render_region_overlay(image: Image.Image, regions: Sequence[RegionAnnotation]) -> Image.Image:
    """Copy of ``image`` with each region's bbox, boundary and id drawn on it."""
    out = image.convert("RGB")
    draw = ImageDraw.Draw(out)
    for i, region in enumerate(regions):
        color = OVERLAY_COLORS[i % len(OVERLAY_COLORS)]
        draw.rectangle(region.bbox.as_list(), outline=color, width=OVERLAY_WIDTH)
        if len(region.boundary) >= 2:
            draw.line([tuple(p) for p in (*region.boundary, region.boundary[0])], fill=color, width=OVERLAY_WIDTH)
        draw.text((region.bbox.x1 + 4, region.bbox.y1 + 4), region.id, fill=color)
    return out


@dataclass
class ImageScene:
    id: str
    image_ref: Path
    image_size: tuple[int, int]
    regions: list[RegionAnnotation]

    def region(self, region_id: str) -> RegionAnnotation:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise AnnotationError(f"No region {region_id!r} in {self.id}")


def build_image_scene(source: ImageSource, index: int, k: int = BOUNDARY_POINTS) -> ImageScene:
    """Annotate every captioned mask of one source image; all masks must share one size."""
    shapes = {array.shape for _, _, array in source.regions}
    if len(shapes) > 1:
        raise AnnotationError(f"{source.image}: masks disagree in size {sorted(shapes)}")
    if shapes:
        h, w = shapes.pop()
        size = (int(w), int(h))
    else:
        with Image.open(source.image) as im:
            size = im.size
    regions = []
    for region_id, caption, array in source.regions:
        try:
            regions.append(build_region(array, caption, region_id, k))
        except GeometryError as e:
            logger.warning("%s: skipping region %s: %s", source.image, region_id, e)
    return ImageScene(f"image_{index:06d}", source.image, size, regions)
