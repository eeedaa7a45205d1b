"""Tests for contour extraction, boundary sampling, zig-zag trails and mask inputs."""

from __future__ import annotations

import json
import random

import cv2
import numpy as np
import pytest
from PIL import Image

from actsynth.errors import AnnotationError, GeometryError
from actsynth.geometry import Point, Polygon, Rect
from actsynth.image_annot import (
    ImageSource,
    build_image_scene,
    build_region,
    decode_rle,
    extract_outer_contour,
    load_image_source,
    load_mask,
    region_to_dict,
    render_region_overlay,
    sample_boundary,
    trail_stroke_width,
    zigzag_trail,
)


def _square(size: int, side: int, at: int = 1) -> np.ndarray:
    mask = np.zeros((size, size), dtype=np.uint8)
    mask[at : at + side, at : at + side] = 255
    return mask


def _disk() -> np.ndarray:
    mask = np.zeros((101, 101), dtype=np.uint8)
    cv2.circle(mask, (50, 50), 30, 255, -1)
    return mask


def _u_shape() -> np.ndarray:
    mask = np.zeros((60, 60), dtype=np.uint8)
    mask[10:50, 10:20] = 1
    mask[10:50, 40:50] = 1
    mask[40:50, 10:50] = 1
    return mask


def _blob(rng: random.Random) -> np.ndarray:
    """Filled ellipses around a shared center, pierced by isolated one-pixel holes."""
    h, w = rng.randint(8, 64), rng.randint(8, 64)
    mask = np.zeros((h, w), dtype=np.uint8)
    cx, cy = rng.randrange(w), rng.randrange(h)
    for _ in range(rng.randint(1, 5)):
        axes = (rng.randint(3, w), rng.randint(3, h))
        cv2.ellipse(mask, (cx, cy), axes, rng.uniform(0, 180), 0, 360, 1, -1)
    for _ in range(rng.randint(0, 6)):
        x, y = rng.randrange(1, w - 1), rng.randrange(1, h - 1)
        if mask[y - 1 : y + 2, x - 1 : x + 2].all():
            mask[y, x] = 0
    return mask


def _boundary_oracle(mask: np.ndarray) -> set[tuple[int, int]]:
    """Foreground pixels 4-adjacent to the background reachable from outside the image."""
    padded = np.pad(mask > 0, 1)
    h, w = padded.shape
    outside = np.zeros_like(padded)
    stack = [(0, 0)]
    outside[0, 0] = True
    while stack:
        y, x = stack.pop()
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and not padded[ny, nx] and not outside[ny, nx]:
                outside[ny, nx] = True
                stack.append((ny, nx))
    border = set()
    for y, x in zip(*np.nonzero(padded), strict=True):
        if outside[y - 1, x] or outside[y + 1, x] or outside[y, x - 1] or outside[y, x + 1]:
            border.add((int(x) - 1, int(y) - 1))
    return border


class TestExtractOuterContour:
    def test_square_border(self):
        [loop] = extract_outer_contour(_square(5, 3))
        assert len(loop) == 8
        assert set(loop) == {(x, y) for x in range(1, 4) for y in range(1, 4)} - {(2, 2)}

    def test_single_pixel(self):
        mask = np.zeros((5, 5), dtype=np.uint8)
        mask[2, 3] = 1
        assert extract_outer_contour(mask) == [[Point(3, 2)]]

    def test_two_blobs_largest_first(self):
        mask = np.zeros((20, 20), dtype=np.uint8)
        mask[1:3, 1:3] = 1
        mask[8:14, 8:14] = 1
        big, small = extract_outer_contour(mask)
        assert all(8 <= x < 14 and 8 <= y < 14 for x, y in big)
        assert all(1 <= x < 3 and 1 <= y < 3 for x, y in small)

    def test_diagonal_pixels_connect(self):
        mask = np.zeros((5, 5), dtype=np.uint8)
        mask[1, 1] = mask[2, 2] = 1
        assert len(extract_outer_contour(mask)) == 1

    def test_empty_mask(self):
        with pytest.raises(GeometryError):
            extract_outer_contour(np.zeros((4, 4), dtype=np.uint8))

    def test_holes_ignored(self):
        mask = _square(12, 10)
        mask[4:8, 4:8] = 0
        [loop] = extract_outer_contour(mask)
        assert len(loop) == 36

    def test_matches_boundary_pixel_oracle(self):
        rng = random.Random(2024)
        for _ in range(100):
            mask = _blob(rng)
            traced = {(p.x, p.y) for loop in extract_outer_contour(mask) for p in loop}
            assert traced == _boundary_oracle(mask)


class TestSampleBoundary:
    def test_identity_when_k_matches(self):
        [loop] = extract_outer_contour(_square(8, 6))
        assert len(loop) == 20
        sample = sample_boundary(loop, 20)
        assert not sample.flagged
        assert sample.points[0] == Point(1, 1)
        start = loop.index(Point(1, 1))
        assert list(sample.points) == loop[start:] + loop[:start]

    def test_square_corners(self):
        [loop] = extract_outer_contour(_square(13, 11))
        assert len(loop) == 40
        sample = sample_boundary(loop, 4)
        assert set(sample.points) == {Point(1, 1), Point(11, 1), Point(11, 11), Point(1, 11)}

    def test_three_points(self):
        [loop] = extract_outer_contour(_disk())
        sample = sample_boundary(loop, 3)
        assert len(set(sample.points)) == 3
        assert isinstance(sample.polygon, Polygon)

    def test_order_preserved(self):
        [loop] = extract_outer_contour(_disk())
        sample = sample_boundary(loop, 20)
        start = loop.index(sample.points[0])
        rotated = loop[start:] + loop[:start]
        positions = [rotated.index(p) for p in sample.points]
        assert positions == sorted(positions)
        assert len(set(positions)) == 20

    def test_short_loop_flagged(self):
        [loop] = extract_outer_contour(_square(5, 3))
        sample = sample_boundary(loop, 20)
        assert sample.flagged
        assert len(sample.points) == 8

    def test_k_too_small(self):
        with pytest.raises(GeometryError):
            sample_boundary([Point(0, 0), Point(1, 0), Point(1, 1)], 2)


class TestZigzagTrail:
    def test_twenty(self):
        pts = [Point(i, 0) for i in range(1, 21)]
        assert [p.x for p in zigzag_trail(pts)[:8]] == [1, 2, 20, 3, 19, 4, 18, 5]

    def test_six(self):
        pts = [Point(i, 0) for i in range(1, 7)]
        assert [p.x for p in zigzag_trail(pts)] == [1, 2, 6, 3, 5, 4]

    def test_three(self):
        pts = [Point(i, 0) for i in range(1, 4)]
        assert zigzag_trail(pts) == pts

    def test_permutation(self):
        rng = random.Random(0)
        for _ in range(200):
            n = rng.randint(3, 60)
            pts = [Point(i, rng.randint(0, 99)) for i in range(n)]
            trail = zigzag_trail(pts)
            assert len(trail) == n
            assert sorted(trail) == sorted(pts)
            assert trail[:2] == pts[:2]


class TestBuildRegion:
    def test_full_frame(self):
        region = build_region(np.ones((30, 40), dtype=np.uint8), "everything", "r0")
        assert region.bbox == Rect(0, 0, 40, 30)
        assert region.center == (20, 15)
        assert region.click_point == region.center

    def test_disk_center(self):
        region = build_region(_disk(), "a disk", "r1")
        assert abs(region.center.x - 50) <= 1 and abs(region.center.y - 50) <= 1
        assert len(region.boundary) == 20

    def test_boundary_points_on_edge(self):
        mask = _disk() > 0
        padded = np.pad(mask, 1)
        region = build_region(mask, "a disk", "r1")
        for x, y in region.boundary:
            window = padded[y : y + 3, x : x + 3]
            assert mask[y, x]
            assert not window.all()

    def test_concave_click_point_on_mask(self):
        mask = _u_shape()
        region = build_region(mask, "a cup", "r2")
        assert mask[int(region.click_point.y), int(region.click_point.x)]
        assert region.click_point != region.center

    def test_stroke_width(self):
        region = build_region(_disk(), "a disk", "r1")
        assert trail_stroke_width(region.bbox) == pytest.approx(61 / 10)

    def test_to_dict(self):
        doc = region_to_dict(build_region(_disk(), "a disk", "r1"))
        assert doc["caption"] == "a disk"
        assert len(doc["boundary"]) == 20


class TestMaskInputs:
    def test_rle_column_major(self):
        mask = decode_rle({"size": [2, 3], "counts": [1, 2, 3]})
        expected = np.array([[False, True, False], [True, False, False]])
        assert (mask == expected).all()

    def test_rle_bad_total(self):
        with pytest.raises(AnnotationError):
            decode_rle({"size": [2, 2], "counts": [1, 1]})

    def test_rle_malformed(self):
        with pytest.raises(AnnotationError):
            decode_rle({"counts": [4]})

    def test_png_mask(self, tmp_path):
        Image.fromarray(_square(6, 2)).save(tmp_path / "m.png")
        mask = load_mask(tmp_path / "m.png")
        assert mask.dtype == bool
        assert mask.sum() == 4

    def test_rgb_png_refused(self, tmp_path):
        Image.new("RGB", (4, 4)).save(tmp_path / "m.png")
        with pytest.raises(AnnotationError):
            load_mask(tmp_path / "m.png")

    def test_sidecar(self, tmp_path):
        Image.fromarray(_square(6, 2)).save(tmp_path / "m.png")
        doc = {
            "images": [
                {
                    "image": "photo.jpg",
                    "regions": [
                        {"id": "a", "caption": "a box", "mask": "m.png"},
                        {"id": "b", "caption": "a bar", "mask": {"size": [2, 2], "counts": [2, 2]}},
                    ],
                }
            ]
        }
        (tmp_path / "source.json").write_text(json.dumps(doc))
        [source] = load_image_source(tmp_path / "source.json")
        assert source.image == tmp_path / "photo.jpg"
        assert [r[0] for r in source.regions] == ["a", "b"]
        assert source.regions[1][2].sum() == 2

    def test_sidecar_missing_keys(self, tmp_path):
        doc = {"images": [{"image": "p.jpg", "regions": [{"id": "a", "caption": "a box"}]}]}
        (tmp_path / "source.json").write_text(json.dumps(doc))
        with pytest.raises(AnnotationError, match=r"images\[0\]\.regions\[0\]: .*mask"):
            load_image_source(tmp_path / "source.json")
        (tmp_path / "source.json").write_text(json.dumps({"images": [{"regions": []}]}))
        with pytest.raises(AnnotationError, match=r"images\[0\]: .*image"):
            load_image_source(tmp_path / "source.json")

    def test_overlay(self):
        image = Image.new("RGB", (101, 101), (255, 255, 255))
        out = render_region_overlay(image, [build_region(_disk(), "a disk", "r1")])
        assert out.size == image.size
        assert out.tobytes() != image.tobytes()
        assert image.getpixel((20, 20)) == (255, 255, 255)


class TestImageScene:
    def test_regions_and_size(self):
        source = ImageSource("photo.jpg", [("a", "a disk", _disk()), ("b", "a cup", _u_shape()[:101, :101])])
        with pytest.raises(AnnotationError):
            build_image_scene(source, 0)
        padded = np.zeros((101, 101), dtype=np.uint8)
        padded[:60, :60] = _u_shape()
        scene = build_image_scene(ImageSource("photo.jpg", [("a", "a disk", _disk()), ("b", "a cup", padded)]), 3)
        assert scene.id == "image_000003"
        assert scene.image_size == (101, 101)
        assert [r.id for r in scene.regions] == ["a", "b"]
        assert scene.region("b").caption == "a cup"

    def test_empty_mask_skipped(self):
        empty = np.zeros((101, 101), dtype=np.uint8)
        scene = build_image_scene(ImageSource("photo.jpg", [("a", "a disk", _disk()), ("z", "nothing", empty)]), 0)
        assert [r.id for r in scene.regions] == ["a"]
