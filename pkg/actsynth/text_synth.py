"""Text pages: code and prose laid out on a background with one box per character.

Layout is greedy. Words wrap at the blank region's right edge, a word wider
than the whole region breaks between characters, and a space that falls on a
wrap point is dropped. Every other character, whitespace included, gets a box
spanning its advance and the full line height, so cursor gaps are defined
everywhere. Lines that do not fit vertically are truncated and the page is
flagged.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Literal

import yaml
from PIL import Image, ImageDraw

from actsynth.errors import AmbiguousSpanError, ConfigError, TextLayoutError
from actsynth.eval_engine import CorrectRegion
from actsynth.fonts import Font, line_height, load_font
from actsynth.geometry import Rect, Rgb, sample_color_hsv

logger = logging.getLogger(__name__)

ContentKind = Literal["code", "natural"]
SpanKind = Literal["short_span", "long_span", "word"]
Weight = Literal["regular", "bold"]

CONTENT_KINDS: tuple[ContentKind, ...] = ("code", "natural")
SPAN_KINDS: tuple[SpanKind, ...] = ("short_span", "long_span", "word")
TAB_SIZE = 4
CURSOR_TOLERANCE = 2
SPAN_ATTEMPTS = 10
SHORT_SPAN_TOKENS = (1, 3)
LONG_SPAN_TOKENS = (8, 24)
PAGE_SIZE = (1280, 800)
TOOLBAR_HEIGHT = 48
PAGE_MARGIN_RANGE = (24, 64)
CODE_FONT_RANGE = (12, 22)
NATURAL_FONT_RANGE = (14, 28)
LINE_GAP_RANGE = (2, 10)

_TOKEN_RE = re.compile(r"\S+|\s")
_WORD_RE = re.compile(r"[A-Za-z][A-Za-z']+")


@dataclass(frozen=True)
class FontParams:
    face: str | None = None
    size: int = 16
    color: Rgb = Rgb(0, 0, 0)
    weight: Weight = "regular"
    tracking: int = 0
    line_gap: int = 4

    @property
    def face_id(self) -> str:
        return Path(self.face).stem if self.face else "default"


@dataclass(frozen=True)
class Glyph:
    ch: str
    bbox: Rect
    line: int


@dataclass
class TextPage:
    id: str
    image: Image.Image
    content_kind: ContentKind
    glyphs: list[Glyph]
    lines: list[Rect]
    font: FontParams
    blank_region: Rect
    truncated: bool = False

    @property
    def text(self) -> str:
        return "".join(g.ch for g in self.glyphs)


@dataclass(frozen=True)
class SpanTarget:
    start: int
    end: int
    kind: SpanKind
    context_hint: str = ""
    text: str = ""


@dataclass(frozen=True)
class Background:
    image: Image.Image
    blank_region: Rect
    name: str = "plain"


class _Typesetter:
    """Greedy line breaker that records one box per placed character."""

    def __init__(self, font: Font, params: FontParams, region: Rect) -> None:
        self.font = font
        self.params = params
        self.region = region
        self.line_h = line_height(font)
        self.step = self.line_h + params.line_gap
        self.tops: list[float] = []
        self.glyphs: list[Glyph] = []
        self.pen = float(region.x1)

    def _open_line(self) -> bool:
        top = self.region.y1 + len(self.tops) * self.step
        if top + self.line_h > self.region.y2:
            return False
        self.tops.append(top)
        self.pen = float(self.region.x1)
        return True

    def _at_line_start(self) -> bool:
        return not self.glyphs or self.glyphs[-1].line != len(self.tops) - 1

    def _width(self, token: str) -> float:
        return sum(self.font.getlength(ch) for ch in token) + self.params.tracking * (len(token) - 1)

    def _fits(self, width: float) -> bool:
        return round(self.pen + width) <= self.region.x2

    def _place(self, ch: str) -> None:
        advance = self.font.getlength(ch)
        top = self.tops[-1]
        bbox = Rect(round(self.pen), top, round(self.pen + advance), top + self.line_h)
        self.glyphs.append(Glyph(ch, bbox, len(self.tops) - 1))
        self.pen += advance + self.params.tracking

    def run(self, text: str) -> bool:
        """Lay out ``text``; returns True when it had to be truncated."""
        if not self._open_line():
            raise TextLayoutError(f"blank region {self.region.as_list()} is shorter than one line")
        for p, paragraph in enumerate(text.split("\n")):
            if p and not self._open_line():
                return True
            for token in _TOKEN_RE.findall(paragraph):
                if not self._fits(self._width(token)) and not self._at_line_start():
                    if token.isspace():
                        continue
                    if not self._open_line():
                        return True
                for ch in token:
                    if not self._fits(self.font.getlength(ch)):
                        if self._at_line_start():
                            raise TextLayoutError(f"glyph {ch!r} is wider than the blank region")
                        if ch.isspace():
                            continue
                        if not self._open_line():
                            return True
                    self._place(ch)
        return False

    def line_boxes(self) -> list[Rect]:
        ends = {g.line: g.bbox.x2 for g in self.glyphs}
        x1 = self.region.x1
        return [Rect(x1, top, ends.get(i, x1), top + self.line_h) for i, top in enumerate(self.tops)]


def compose_page(
    background: Image.Image,
    blank_region: Rect,
    content: str,
    font_params: FontParams,
    content_kind: ContentKind = "natural",
    page_id: str = "",
) -> TextPage:
    """Typeset ``content`` into ``blank_region`` of a copy of ``background``."""
    width, height = background.size
    if not blank_region.within(width, height):
        raise TextLayoutError(f"blank region {blank_region.as_list()} is outside the {width}x{height} background")
    text = content.replace("\r", "").expandtabs(TAB_SIZE).rstrip("\n")
    if not text.replace("\n", ""):
        raise TextLayoutError("no content to lay out")

    font = load_font(font_params.size, font_params.face)
    setter = _Typesetter(font, font_params, blank_region)
    truncated = setter.run(text)
    if truncated:
        logger.debug("page %s truncated after %d lines", page_id, len(setter.tops))

    image = background.convert("RGB")
    draw = ImageDraw.Draw(image)
    stroke = 1 if font_params.weight == "bold" else 0
    color = tuple(font_params.color)
    for g in setter.glyphs:
        if not g.ch.isspace():
            draw.text((g.bbox.x1, g.bbox.y1), g.ch, font=font, fill=color, stroke_width=stroke, stroke_fill=color)
    return TextPage(
        id=page_id,
        image=image,
        content_kind=content_kind,
        glyphs=setter.glyphs,
        lines=setter.line_boxes(),
        font=font_params,
        blank_region=blank_region,
        truncated=truncated,
    )


# -- targets


def _gap_region(page: TextPage, line: int, left: float, right: float, tolerance: float) -> CorrectRegion:
    box = page.lines[line]
    width, height = page.image.size
    return CorrectRegion(Rect(left - tolerance, box.y1, right + tolerance, box.y2).clip(width, height))


def _leading_gap(page: TextPage, i: int, tolerance: float) -> CorrectRegion:
    g = page.glyphs[i]
    prev = page.glyphs[i - 1] if i > 0 else None
    left = prev.bbox.x2 if prev is not None and prev.line == g.line else g.bbox.x1
    return _gap_region(page, g.line, left, g.bbox.x1, tolerance)


def _trailing_gap(page: TextPage, i: int, tolerance: float) -> CorrectRegion:
    g = page.glyphs[i]
    nxt = page.glyphs[i + 1] if i + 1 < len(page.glyphs) else None
    right = nxt.bbox.x1 if nxt is not None and nxt.line == g.line else g.bbox.x2
    return _gap_region(page, g.line, g.bbox.x2, right, tolerance)


def cursor_target(page: TextPage, index: int, tolerance: float = CURSOR_TOLERANCE) -> CorrectRegion:
    """Region for placing the insertion cursor before glyph ``index``.

    ``index == len(page.glyphs)`` means after the last glyph.
    """
    n = len(page.glyphs)
    if n == 0 or not 0 <= index <= n:
        raise TextLayoutError(f"cursor index {index} out of range for {n} glyphs")
    if index == n:
        return _trailing_gap(page, n - 1, tolerance)
    return _leading_gap(page, index, tolerance)


def _check_span(page: TextPage, start: int, end: int) -> None:
    if not 0 <= start < end <= len(page.glyphs):
        raise TextLayoutError(f"span [{start}, {end}) invalid for {len(page.glyphs)} glyphs")


def span_drag_target(page: TextPage, span: SpanTarget, tolerance: float = CURSOR_TOLERANCE) -> list[CorrectRegion]:
    """Unranked start and end regions; a drag in either direction is correct."""
    _check_span(page, span.start, span.end)
    return [_leading_gap(page, span.start, tolerance), _trailing_gap(page, span.end - 1, tolerance)]


# -- occurrences and context hints


def _joined(page: TextPage) -> tuple[str, list[int]]:
    """Page text with a newline at each line break, and each glyph's offset into it."""
    chars: list[str] = []
    offsets: list[int] = []
    for i, g in enumerate(page.glyphs):
        if i and g.line != page.glyphs[i - 1].line:
            chars.append("\n")
        offsets.append(len(chars))
        chars.append(g.ch)
    return "".join(chars), offsets


def span_text(page: TextPage, start: int, end: int) -> str:
    _check_span(page, start, end)
    joined, offsets = _joined(page)
    return joined[offsets[start] : offsets[end - 1] + 1]


def find_occurrences(page: TextPage, text: str) -> list[int]:
    """Start glyph index of every occurrence of ``text``, overlapping ones included."""
    if not text:
        raise TextLayoutError("cannot search for empty text")
    joined, offsets = _joined(page)
    glyph_at = {offset: i for i, offset in enumerate(offsets)}
    found = []
    k = joined.find(text)
    while k != -1:
        if k in glyph_at:
            found.append(glyph_at[k])
        k = joined.find(text, k + 1)
    return found


def _previous_word(joined: str, offset: int) -> str | None:
    m = re.search(r"(\S+)\s*$", joined[:offset])
    return m.group(1) if m else None


def make_span_target(page: TextPage, start: int, end: int, kind: SpanKind) -> SpanTarget:
    """Build a span target, adding context when its text occurs more than once.

    The hint names the line when no other copy starts on it, else the word
    before the span. Raises AmbiguousSpanError when neither separates the copies.
    """
    text = span_text(page, start, end)
    occurrences = find_occurrences(page, text)
    if len(occurrences) <= 1:
        return SpanTarget(start, end, kind, "", text)

    line = page.glyphs[start].line
    if [page.glyphs[o].line for o in occurrences].count(line) == 1:
        return SpanTarget(start, end, kind, f"on line {line + 1}", text)

    joined, offsets = _joined(page)
    before = [_previous_word(joined, offsets[o]) for o in occurrences]
    mine = before[occurrences.index(start)]
    if before.count(mine) == 1:
        hint = "at the start of the text" if mine is None else f'after "{mine}"'
        return SpanTarget(start, end, kind, hint, text)
    raise AmbiguousSpanError(f"{text!r} occurs {len(occurrences)} times with no distinguishing context")


def sample_span(
    page: TextPage, rng: random.Random, kind: SpanKind, attempts: int = SPAN_ATTEMPTS
) -> SpanTarget | None:
    """Draw a span of the given kind, skipping draws that stay ambiguous."""
    joined, offsets = _joined(page)
    glyph_at = {offset: i for i, offset in enumerate(offsets)}
    pattern = _WORD_RE if kind == "word" else re.compile(r"\S+")
    tokens = [(glyph_at[m.start()], glyph_at[m.end() - 1] + 1) for m in pattern.finditer(joined)]
    if not tokens:
        return None

    for _ in range(attempts):
        if kind == "word":
            start, end = rng.choice(tokens)
        else:
            lo, hi = SHORT_SPAN_TOKENS if kind == "short_span" else LONG_SPAN_TOKENS
            count = rng.randint(lo, hi)
            i = rng.randrange(max(1, len(tokens) - count + 1))
            j = min(i + count, len(tokens)) - 1
            start, end = tokens[i][0], tokens[j][1]
            if kind == "short_span" and page.glyphs[start].line != page.glyphs[end - 1].line:
                continue
        try:
            return make_span_target(page, start, end, kind)
        except AmbiguousSpanError as e:
            logger.debug("page %s: %s", page.id, e)
    return None


# -- backgrounds, content and the per-page pipeline


def plain_background(rng: random.Random, size: tuple[int, int] = PAGE_SIZE) -> Background:
    """A light document background with a toolbar strip and a blank writing area."""
    width, height = size
    paper = sample_color_hsv(rng, saturation_range=(0.0, 0.06), value_range=(0.94, 1.0)).color
    bar = sample_color_hsv(rng, saturation_range=(0.0, 0.10), value_range=(0.70, 0.88)).color
    image = Image.new("RGB", size, tuple(paper))
    ImageDraw.Draw(image).rectangle([0, 0, width, TOOLBAR_HEIGHT], fill=tuple(bar))
    margin = rng.randint(*PAGE_MARGIN_RANGE)
    region = Rect(margin, TOOLBAR_HEIGHT + margin, width - margin, height - margin)
    return Background(image, region)


def load_backgrounds(directory: Path) -> list[Background]:
    """Backgrounds listed in ``directory/backgrounds.json`` with their blank regions."""
    index = directory / "backgrounds.json"
    try:
        entries = json.loads(index.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read background index {index}: {e}") from e
    backgrounds = []
    for i, entry in enumerate(entries):
        try:
            image = Image.open(directory / entry["image"]).convert("RGB")
            region = Rect(*entry["blank_region"])
        except (KeyError, TypeError) as e:
            raise ConfigError(f"{index}: entry {i} is malformed, missing or invalid {e}") from e
        if not region.within(*image.size):
            raise ConfigError(f"{entry['image']}: blank region {region.as_list()} leaves the image")
        backgrounds.append(Background(image, region, entry["image"]))
    return backgrounds


def load_snippets(directory: Path | None = None) -> dict[ContentKind, list[str]]:
    """Bundled snippets, or ``code/*.txt`` and ``natural/*.txt`` under ``directory``."""
    if directory is None:
        text = (resources.files("actsynth") / "data" / "text_snippets.yaml").read_text(encoding="utf-8")
        data: dict[str, Any] = yaml.safe_load(text)
        snippets = {kind: [str(s) for s in data.get(kind, [])] for kind in CONTENT_KINDS}
    else:
        snippets = {
            kind: [p.read_text(encoding="utf-8") for p in sorted((directory / kind).glob("*.txt"))]
            for kind in CONTENT_KINDS
        }
    for kind, items in snippets.items():
        if not items:
            raise ConfigError(f"No {kind} snippets available")
    return snippets


def sample_font_params(
    rng: random.Random, kind: ContentKind, font_paths: list[str] | tuple[str, ...] = ()
) -> FontParams:
    size_range = CODE_FONT_RANGE if kind == "code" else NATURAL_FONT_RANGE
    return FontParams(
        face=rng.choice(font_paths) if font_paths else None,
        size=rng.randint(*size_range),
        color=sample_color_hsv(rng, value_range=(0.0, 0.35)).color,
        weight=rng.choice(("regular", "regular", "bold")),
        tracking=rng.choice((0, 0, 0, 1)),
        line_gap=rng.randint(*LINE_GAP_RANGE),
    )


def generate_text_page(
    global_seed: int | str,
    index: int,
    backgrounds: list[Background] | None = None,
    snippets: dict[ContentKind, list[str]] | None = None,
    font_paths: list[str] | tuple[str, ...] = (),
) -> TextPage:
    """One text page; a pure function of its arguments."""
    rng = random.Random(f"{global_seed}/text/{index}")
    pool = snippets if snippets is not None else load_snippets()
    kind: ContentKind = rng.choice(CONTENT_KINDS)
    content = rng.choice(pool[kind])
    background = rng.choice(backgrounds) if backgrounds else plain_background(rng)
    font = sample_font_params(rng, kind, font_paths)
    return compose_page(background.image, background.blank_region, content, font, kind, f"text_{index:06d}")


def page_annotation(page: TextPage, image_name: str) -> dict[str, Any]:
    return {
        "image": image_name,
        "content_kind": page.content_kind,
        "font": {"face": page.font.face_id, "size": page.font.size, "weight": page.font.weight},
        "truncated": page.truncated,
        "glyphs": [{"ch": g.ch, "bbox": [int(v) for v in g.bbox.as_list()], "line": g.line} for g in page.glyphs],
        "lines": [[int(v) for v in box.as_list()] for box in page.lines],
    }
