"""Exception hierarchy shared by every actsynth module."""

from __future__ import annotations

from dataclasses import dataclass, field


class ActsynthError(RuntimeError):
    """Base exception for actsynth errors."""


class ConfigError(ActsynthError):
    """Raised for invalid run configuration."""


class GeometryError(ActsynthError):
    """Raised for degenerate geometry (zero-area rects, collapsed polygons)."""


@dataclass
class SuiteSchemaError(ActsynthError):
    """Raised when a benchmark suite or prediction file violates its schema."""

    sample_id: str | None
    field_path: str
    message: str

    def __str__(self) -> str:
        where = self.sample_id if self.sample_id is not None else "<file>"
        return f"{where}: {self.field_path}: {self.message}"


class EvalError(ActsynthError):
    """Raised for inconsistent evaluation inputs (id mismatch, duplicate predictions)."""


class ShapeError(ActsynthError):
    """Raised for unknown shape kinds."""


class AnnotationError(ActsynthError):
    """Raised when a scene cannot be serialized (e.g. missing references)."""


class TableError(ActsynthError):
    """Raised when a table model breaks its tiling invariant."""


class TextLayoutError(ActsynthError):
    """Raised when text cannot be laid out in the requested region."""


class AmbiguousSpanError(ActsynthError):
    """Raised when a span occurs more than once and no context hint can tell the copies apart."""


@dataclass
class TraceParseError(ActsynthError):
    """Raised when a response text cannot be parsed into an action trace."""

    message: str
    line: int | None = None

    def __str__(self) -> str:
        if self.line is None:
            return self.message
        return f"line {self.line}: {self.message}"


class TraceError(ActsynthError):
    """Raised for structurally invalid scripts or templates."""


class LlmError(ActsynthError):
    """Base exception for LLM transport errors."""


class LlmAuthError(LlmError):
    """Raised when no credential or endpoint is configured."""


@dataclass
class LlmHTTPError(LlmError):
    """Raised for HTTP errors from the chat-completions endpoint."""

    status_code: int
    url: str
    response_text: str | None = None
    headers: dict[str, str] = field(default_factory=dict)

    def __str__(self) -> str:
        error_text = self.response_text[:200] if self.response_text else "No response body"
        return f"LLM endpoint error {self.status_code} for {self.url}: {error_text}"


class DatasetError(ActsynthError):
    """Raised for shard, manifest and mixing failures."""
