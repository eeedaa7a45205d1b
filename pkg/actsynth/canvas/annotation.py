"""Canvas annotation JSON: emit from a generated scene and parse back."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from actsynth.canvas.scene import CanvasElement, CanvasScene
from actsynth.canvas.shapes import Style, get_kind
from actsynth.errors import AnnotationError, GeometryError, ShapeError
from actsynth.geometry import Point, Rect, Rgb


@dataclass
class ElementAnnotation:
    id: str
    shape_type: str
    reference: str
    bbox: Rect
    center_point: Point
    box_points: dict[str, Point]
    rotation_handle_center: Point
    styling: Style
    vertices: dict[str, Point] = field(default_factory=dict)
    endpoints: dict[str, Point] = field(default_factory=dict)


@dataclass
class CanvasAnnotation:
    width: int
    height: int
    background: Rgb
    elements: list[ElementAnnotation]

    def element(self, element_id: str) -> ElementAnnotation:
        for e in self.elements:
            if e.id == element_id:
                return e
        raise AnnotationError(f"No element {element_id!r} in annotation")


def element_annotation(element: CanvasElement) -> ElementAnnotation:
    if element.reference is None:
        raise AnnotationError(f"Element {element.id} has no reference assigned")
    return ElementAnnotation(
        id=element.id,
        shape_type=element.kind.name,
        reference=element.reference,
        bbox=element.shape.bbox,
        center_point=element.shape.center,
        box_points=dict(element.chrome.box_points),
        rotation_handle_center=element.chrome.rotation_handle_center,
        styling=element.style,
        vertices=dict(element.shape.vertices),
        endpoints=dict(element.shape.endpoints),
    )


def scene_annotation(scene: CanvasScene) -> CanvasAnnotation:
    return CanvasAnnotation(
        width=scene.params.width,
        height=scene.params.height,
        background=scene.params.background,
        elements=[element_annotation(e) for e in scene.elements],
    )


def _pt(p: Point) -> list[int]:
    return [int(p.x), int(p.y)]


def _points(named: dict[str, Point]) -> dict[str, list[int]]:
    return {name: _pt(p) for name, p in named.items()}


def emit_annotation(scene: CanvasScene | CanvasAnnotation) -> dict[str, Any]:
    """Serialize a scene to the annotation document; every coordinate is an integer."""
    ann = scene if isinstance(scene, CanvasAnnotation) else scene_annotation(scene)
    elements = []
    for e in ann.elements:
        data: dict[str, Any] = {
            "id": e.id,
            "shape_type": e.shape_type,
            "reference": e.reference,
            "bbox": [int(v) for v in e.bbox.as_list()],
            "center_point": _pt(e.center_point),
            "box_points": _points(e.box_points),
            "rotation_handle_center": _pt(e.rotation_handle_center),
            "styling": {
                "fill": list(e.styling.fill) if e.styling.fill is not None else None,
                "outline": list(e.styling.outline),
                "stroke_width": e.styling.stroke_width,
                "line_style": e.styling.line_style,
            },
        }
        if e.vertices:
            data["vertices"] = _points(e.vertices)
        if e.endpoints:
            data["endpoints"] = _points(e.endpoints)
        elements.append(data)
    return {
        "canvas": {"width": ann.width, "height": ann.height, "background": list(ann.background)},
        "elements": elements,
    }


def _parse_points(raw: Any, where: str) -> dict[str, Point]:
    if not isinstance(raw, dict):
        raise AnnotationError(f"{where}: expected an object of named points")
    out = {}
    for name, value in raw.items():
        if not isinstance(value, list) or len(value) != 2:
            raise AnnotationError(f"{where}.{name}: expected [x, y]")
        out[name] = Point(value[0], value[1])
    return out


def parse_annotation(doc: dict[str, Any]) -> CanvasAnnotation:
    """Inverse of :func:`emit_annotation`; raises AnnotationError on malformed input."""
    try:
        canvas = doc["canvas"]
        elements = []
        for i, raw in enumerate(doc["elements"]):
            where = f"elements[{i}]"
            get_kind(raw["shape_type"])
            styling = raw["styling"]
            elements.append(
                ElementAnnotation(
                    id=raw["id"],
                    shape_type=raw["shape_type"],
                    reference=raw["reference"],
                    bbox=Rect(*raw["bbox"]),
                    center_point=Point(*raw["center_point"]),
                    box_points=_parse_points(raw["box_points"], f"{where}.box_points"),
                    rotation_handle_center=Point(*raw["rotation_handle_center"]),
                    styling=Style(
                        fill=Rgb.parse(styling["fill"]) if styling["fill"] is not None else None,
                        outline=Rgb.parse(styling["outline"]),
                        stroke_width=styling["stroke_width"],
                        line_style=styling["line_style"],
                    ),
                    vertices=_parse_points(raw.get("vertices", {}), f"{where}.vertices"),
                    endpoints=_parse_points(raw.get("endpoints", {}), f"{where}.endpoints"),
                )
            )
        return CanvasAnnotation(
            width=canvas["width"],
            height=canvas["height"],
            background=Rgb.parse(canvas["background"]),
            elements=elements,
        )
    except (KeyError, TypeError) as exc:
        raise AnnotationError(f"Malformed canvas annotation: {exc}") from exc
    except (GeometryError, ShapeError) as exc:
        raise AnnotationError(str(exc)) from exc


def annotation_points(ann: CanvasAnnotation) -> list[Point]:
    """Every coordinate the annotation exposes, for bounds checks."""
    pts = []
    for e in ann.elements:
        pts.extend([Point(e.bbox.x1, e.bbox.y1), Point(e.bbox.x2, e.bbox.y2), e.center_point])
        pts.extend(e.box_points.values())
        pts.append(e.rotation_handle_center)
        pts.extend(e.vertices.values())
        pts.extend(e.endpoints.values())
    return pts
