"""PowerPoint-style canvas simulator."""

from actsynth.canvas.annotation import CanvasAnnotation, emit_annotation, parse_annotation
from actsynth.canvas.chrome import ChromeAnnotation, draw_chrome
from actsynth.canvas.scene import (
    CanvasElement,
    CanvasScene,
    SceneParams,
    generate_scene,
    place_elements,
    sample_scene,
    sample_style,
)
from actsynth.canvas.shapes import SHAPE_COUNT, SHAPES, ShapeKind, ShapeResult, Style, rasterize_shape

__all__ = [
    "SHAPES",
    "SHAPE_COUNT",
    "CanvasAnnotation",
    "CanvasElement",
    "CanvasScene",
    "ChromeAnnotation",
    "SceneParams",
    "ShapeKind",
    "ShapeResult",
    "Style",
    "draw_chrome",
    "emit_annotation",
    "generate_scene",
    "parse_annotation",
    "place_elements",
    "rasterize_shape",
    "sample_scene",
    "sample_style",
]
