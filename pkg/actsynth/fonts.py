"""Font loading shared by the table and text renderers."""

from __future__ import annotations

import functools
from pathlib import Path

from PIL import ImageFont

Font = ImageFont.FreeTypeFont | ImageFont.ImageFont


@functools.lru_cache(maxsize=64)
def load_font(size: int, path: str | Path | None = None) -> Font:
    """A TrueType font from ``path``, else Pillow's bundled scalable default."""
    if path is not None:
        return ImageFont.truetype(str(path), size)
    return ImageFont.load_default(size)


def line_height(font: Font) -> int:
    """Height of one text line: ascender top to descender bottom."""
    bbox = font.getbbox("Agjy|")
    return int(bbox[3])
