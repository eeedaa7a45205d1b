"""Training records, JSONL shards with a checksummed manifest, modality mixing and statistics."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import random
from collections import Counter
from collections.abc import Collection, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from PIL import Image

from actsynth.errors import DatasetError, SuiteSchemaError, TraceError, TraceParseError
from actsynth.eval_engine import (
    MODALITIES,
    BannedRegion,
    BenchmarkSample,
    CorrectRegion,
    shape_from_dict,
    shape_to_dict,
)
from actsynth.geometry import Point
from actsynth.trace_dsl import (
    COORDINATE_SPACES,
    ActionTrace,
    Violation,
    classify_action,
    parse_trace,
    render_trace,
    trace_points,
    validate_trace,
)

logger = logging.getLogger(__name__)

EXTERNAL_SOURCE = "OpenCUA"
MIX_SOURCES: tuple[str, ...] = (*MODALITIES, EXTERNAL_SOURCE)
DEFAULT_MIX = {"GUI": 0.34, "Text": 0.25, "Table": 0.10, "Canvas": 0.10, "Image": 0.15, EXTERNAL_SOURCE: 0.06}
WEIGHT_TOLERANCE = 1e-9
SHARD_SIZE = 1000
MANIFEST_NAME = "manifest.json"
IMAGE_DIR = "images"


# -- records


def _compact(value: Any) -> Any:
    """Integral floats as ints, so targets serialize the same after a read-back."""
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, list | tuple):
        return [_compact(v) for v in value]
    if isinstance(value, dict):
        return {k: _compact(v) for k, v in value.items()}
    return value


@dataclass
class Targets:
    """Regions the record's key points must satisfy, in suite-file form."""

    correct: list[CorrectRegion]
    banned: list[BannedRegion] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        correct = []
        for region in self.correct:
            entry: dict[str, Any] = {"shape": _compact(shape_to_dict(region.shape))}
            if region.rank is not None:
                entry["rank"] = region.rank
            correct.append(entry)
        banned = [{"shape": _compact(shape_to_dict(b.shape))} for b in self.banned]
        return {"correct_regions": correct, "banned_regions": banned}

    @classmethod
    def from_dict(cls, data: Any, record_id: str | None = None) -> Targets:
        if not isinstance(data, dict):
            raise DatasetError("targets must be an object")
        try:
            correct = [
                CorrectRegion(shape_from_dict(r["shape"], record_id, f"targets.correct_regions[{i}]"), r.get("rank"))
                for i, r in enumerate(data.get("correct_regions", []))
            ]
            banned = [
                BannedRegion(shape_from_dict(r["shape"], record_id, f"targets.banned_regions[{i}]"))
                for i, r in enumerate(data.get("banned_regions", []))
            ]
        except (KeyError, TypeError) as e:
            raise DatasetError(f"malformed targets: {e}") from e
        except SuiteSchemaError as e:
            raise DatasetError(str(e)) from e
        return cls(correct, banned)


@dataclass
class DatasetRecord:
    prompt: str
    trace: ActionTrace
    modality: str
    image: str
    image_size: tuple[int, int]
    task: str = ""
    targets: Targets | None = None

    @property
    def response(self) -> str:
        return render_trace(self.trace)

    def key_points(self) -> list[Point]:
        """Key points in pixels, whatever space the trace uses."""
        points = trace_points(self.trace)
        if self.trace.coordinate_space == "normalized":
            w, h = self.image_size
            return [Point(p.x * w, p.y * h) for p in points]
        return points

    def violations(self, elements: Collection[Any] | None = None) -> list[Violation]:
        return validate_trace(self.trace, elements, self.image_size)

    def as_sample(self, sample_id: str) -> BenchmarkSample:
        if self.targets is None or not self.targets.correct:
            raise DatasetError(f"record {sample_id} carries no target regions")
        return BenchmarkSample(
            id=sample_id,
            modality=self.modality,  # type: ignore[arg-type]
            instruction=self.prompt,
            image_ref=self.image,
            image_size=self.image_size,
            correct_regions=list(self.targets.correct),
            banned_regions=list(self.targets.banned),
        )


def record_to_dict(record: DatasetRecord) -> dict[str, Any]:
    data: dict[str, Any] = {
        "prompt": record.prompt,
        "response": record.response,
        "coordinate_map": dict(record.trace.coordinate_map),
        "used_elements": list(record.trace.used_elements),
        "action-type": record.trace.action_type,
        "modality": record.modality,
        "image": record.image,
        "image_size": list(record.image_size),
        "coordinate_space": record.trace.coordinate_space,
    }
    if record.task:
        data["task"] = record.task
    if record.targets is not None:
        data["targets"] = record.targets.to_dict()
    return data


def record_from_dict(data: Any) -> DatasetRecord:
    if not isinstance(data, dict):
        raise DatasetError("record must be a JSON object")
    try:
        modality = data["modality"]
        if modality not in MIX_SOURCES:
            raise DatasetError(f"unknown modality {modality!r}")
        space = data.get("coordinate_space", "pixels")
        if space not in COORDINATE_SPACES:
            raise DatasetError(f"unknown coordinate space {space!r}")
        width, height = (int(v) for v in data["image_size"])
        trace = parse_trace(
            data["response"],
            coordinate_map=dict(data["coordinate_map"]),
            used_elements=list(data.get("used_elements", [])),
            action_type=str(data["action-type"]),
            coordinate_space=space,
        )
        targets = Targets.from_dict(data["targets"]) if data.get("targets") is not None else None
        return DatasetRecord(
            prompt=str(data["prompt"]),
            trace=trace,
            modality=modality,
            image=str(data["image"]),
            image_size=(width, height),
            task=str(data.get("task", "")),
            targets=targets,
        )
    except TraceParseError as e:
        raise DatasetError(f"response: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"malformed record: {e!r}") from e


def record_line(record: DatasetRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False, separators=(",", ":"))


# -- images


def image_digest(image: Image.Image) -> str:
    """SHA-256 over mode, size and raw pixels; independent of the PNG encoder."""
    h = hashlib.sha256()
    h.update(f"{image.mode}:{image.width}x{image.height}:".encode())
    h.update(image.tobytes())
    return h.hexdigest()


def save_image(image: Image.Image, directory: Path) -> str:
    """Write ``image`` as ``<digest>.png`` under ``directory`` unless present; return the file name."""
    directory.mkdir(parents=True, exist_ok=True)
    name = f"{image_digest(image)}.png"
    path = directory / name
    if not path.exists():
        tmp = path.with_name(name + ".tmp")
        image.save(tmp, format="PNG")
        os.replace(tmp, path)
    return name


# -- shards


@dataclass(frozen=True)
class ShardInfo:
    name: str
    count: int
    checksum: str


@dataclass
class Manifest:
    shards: list[ShardInfo] = field(default_factory=list)
    by_modality: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(s.count for s in self.shards)

    def to_dict(self) -> dict[str, Any]:
        return {
            "shards": [{"name": s.name, "count": s.count, "checksum": s.checksum} for s in self.shards],
            "totals": {"records": self.total, "by_modality": dict(sorted(self.by_modality.items()))},
        }

    @classmethod
    def from_dict(cls, data: Any) -> Manifest:
        try:
            shards = [ShardInfo(str(s["name"]), int(s["count"]), str(s["checksum"])) for s in data["shards"]]
            by_modality = {str(k): int(v) for k, v in data.get("totals", {}).get("by_modality", {}).items()}
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"malformed manifest: {e!r}") from e
        return cls(shards, by_modality)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)


class ShardWriter:
    """The only writer of a dataset directory: buffers records into shards and owns the manifest.

    Image references are checked against ``image_dir`` (``<directory>/images``
    by default) before a record is accepted.
    """

    def __init__(
        self,
        directory: Path,
        shard_size: int = SHARD_SIZE,
        *,
        image_dir: Path | None = None,
        check_images: bool = True,
    ) -> None:
        if shard_size <= 0:
            raise DatasetError(f"shard_size must be positive, got {shard_size}")
        self.directory = directory
        self.shard_size = shard_size
        self.image_dir = image_dir if image_dir is not None else directory / IMAGE_DIR
        self.check_images = check_images
        self.manifest = Manifest()
        self._buffer: list[str] = []
        self._closed = False
        directory.mkdir(parents=True, exist_ok=True)

    def __enter__(self) -> ShardWriter:
        return self

    def __exit__(self, exc_type: Any, exc: Any, tb: Any) -> None:
        if exc_type is None:
            self.close()
        else:
            self.rollback()

    def write(self, record: DatasetRecord) -> None:
        if self._closed:
            raise DatasetError("writer is closed")
        if self.check_images and not (self.image_dir / record.image).is_file():
            raise DatasetError(f"unresolvable image reference {record.image!r}")
        problems = record.violations()
        if problems:
            raise DatasetError(f"invalid record: {', '.join(v.name for v in problems)}")
        self._buffer.append(record_line(record))
        self.manifest.by_modality[record.modality] = self.manifest.by_modality.get(record.modality, 0) + 1
        if len(self._buffer) >= self.shard_size:
            self._flush()

    def write_many(self, records: Iterable[DatasetRecord]) -> None:
        for record in records:
            self.write(record)

    def _flush(self) -> None:
        if not self._buffer:
            return
        name = f"shard_{len(self.manifest.shards):05d}.jsonl"
        payload = ("\n".join(self._buffer) + "\n").encode("utf-8")
        try:
            _atomic_write(self.directory / name, payload)
        except OSError as e:
            self.rollback()
            raise DatasetError(f"failed writing {name}: {e}") from e
        self.manifest.shards.append(ShardInfo(name, len(self._buffer), hashlib.sha256(payload).hexdigest()))
        logger.info("wrote %s (%d records)", name, len(self._buffer))
        self._buffer = []

    def close(self) -> Manifest:
        if self._closed:
            return self.manifest
        self._flush()
        try:
            payload = json.dumps(self.manifest.to_dict(), indent=2, sort_keys=True).encode("utf-8")
            _atomic_write(self.directory / MANIFEST_NAME, payload)
        except OSError as e:
            self.rollback()
            raise DatasetError(f"failed writing manifest: {e}") from e
        self._closed = True
        logger.info("manifest: %d records in %d shards", self.manifest.total, len(self.manifest.shards))
        return self.manifest

    def rollback(self) -> None:
        """Remove every shard this writer produced; the directory keeps no partial manifest."""
        for shard in self.manifest.shards:
            (self.directory / shard.name).unlink(missing_ok=True)
        self.manifest = Manifest()
        self._buffer = []
        self._closed = True


def write_shards(
    records: Iterable[DatasetRecord], directory: Path, shard_size: int = SHARD_SIZE, **kwargs: Any
) -> Manifest:
    with ShardWriter(directory, shard_size, **kwargs) as writer:
        writer.write_many(records)
    return writer.manifest


def read_manifest(directory: Path) -> Manifest:
    path = directory / MANIFEST_NAME
    try:
        return Manifest.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, ValueError) as e:
        raise DatasetError(f"cannot read manifest {path}: {e}") from e


def iter_shard_lines(directory: Path, manifest: Manifest | None = None) -> Iterator[tuple[str, int, bytes]]:
    """Yield ``(shard name, 1-based line number, undecoded line)`` for every record line."""
    manifest = manifest or read_manifest(directory)
    for shard in manifest.shards:
        try:
            with open(directory / shard.name, "rb") as f:
                for lineno, line in enumerate(f, start=1):
                    if line.strip():
                        yield shard.name, lineno, line.rstrip(b"\r\n")
        except OSError as e:
            raise DatasetError(f"cannot read shard {shard.name}: {e}") from e


def parse_record_line(raw: bytes) -> DatasetRecord:
    try:
        data = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise DatasetError(f"invalid UTF-8 at byte {e.start}") from e
    except json.JSONDecodeError as e:
        raise DatasetError(f"invalid JSON: {e}") from e
    return record_from_dict(data)


def read_shards(directory: Path) -> Iterator[DatasetRecord]:
    for name, lineno, line in iter_shard_lines(directory):
        try:
            yield parse_record_line(line)
        except DatasetError as e:
            raise DatasetError(f"{name}:{lineno}: {e}") from e


def verify_manifest(directory: Path) -> list[str]:
    """Checksum and count mismatches between the manifest and the shards on disk."""
    errors = []
    manifest = read_manifest(directory)
    for shard in manifest.shards:
        path = directory / shard.name
        if not path.is_file():
            errors.append(f"{shard.name}: missing")
            continue
        if _sha256(path) != shard.checksum:
            errors.append(f"{shard.name}: checksum mismatch")
        with open(path, "rb") as f:
            count = sum(1 for line in f if line.strip())
        if count != shard.count:
            errors.append(f"{shard.name}: {count} records, manifest says {shard.count}")
    return errors


# -- mixing


@dataclass(frozen=True)
class MixWeights:
    weights: dict[str, float]

    def __post_init__(self) -> None:
        unknown = sorted(set(self.weights) - set(MIX_SOURCES))
        if unknown:
            raise DatasetError(f"unknown mix sources: {unknown}")
        if any(not math.isfinite(w) or w < 0 for w in self.weights.values()):
            raise DatasetError("mix weights must be finite and non-negative")
        total = sum(self.weights.values())
        if abs(total - 1.0) > WEIGHT_TOLERANCE:
            raise DatasetError(f"mix weights sum to {total}, expected 1")

    @classmethod
    def default(cls) -> MixWeights:
        return cls(dict(DEFAULT_MIX))

    @classmethod
    def normalized(cls, raw: Mapping[str, float]) -> MixWeights:
        total = sum(raw.values())
        if total <= 0:
            raise DatasetError("mix weights must have a positive sum")
        return cls({k: v / total for k, v in raw.items()})

    def restricted(self, keys: Iterable[str]) -> MixWeights:
        return MixWeights.normalized({k: self.weights[k] for k in keys})


def mix_stream(
    sources: Mapping[str, Iterable[Any]], weights: MixWeights, rng: random.Random
) -> Iterator[tuple[str, Any]]:
    """Interleave ``sources``; each emission's source is drawn i.i.d. by weight.

    Weighted slots with no source (the external slot by default) are
    renormalized away. An exhausted source is dropped with a warning and the
    remaining weights renormalized; the stream ends when all are exhausted.
    """
    missing = sorted(set(sources) - set(weights.weights))
    if missing:
        raise DatasetError(f"no mix weight for sources {missing}")
    absent = sorted(k for k, w in weights.weights.items() if k not in sources and w > 0)
    if absent:
        logger.info("mix: no records for %s; renormalizing", ", ".join(absent))

    iterators = {k: iter(sources[k]) for k in sorted(sources) if weights.weights[k] > 0}
    while iterators:
        keys = list(iterators)
        key = rng.choices(keys, weights=[weights.weights[k] for k in keys])[0]
        try:
            item = next(iterators[key])
        except StopIteration:
            del iterators[key]
            logger.warning("mix: source %s exhausted; renormalizing over %s", key, ", ".join(iterators) or "nothing")
            continue
        yield key, item


# -- statistics


@dataclass
class DatasetStats:
    total: int = 0
    invalid: int = 0
    manifest_total: int = 0
    cells: Counter[tuple[str, str, str]] = field(default_factory=Counter)
    corrupt_shards: list[str] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)

    def by_modality(self) -> dict[str, int]:
        out: Counter[str] = Counter()
        for (modality, _, _), n in self.cells.items():
            out[modality] += n
        return dict(out)

    @property
    def release_ready(self) -> bool:
        return self.invalid == 0 and not self.corrupt_shards


def dataset_stats(directory: Path) -> DatasetStats:
    """Counts by modality x action type x key-point class, plus invalid records and corrupt shards."""
    stats = DatasetStats()
    manifest = read_manifest(directory)
    stats.manifest_total = manifest.total
    stats.corrupt_shards = sorted({line.split(":")[0] for line in verify_manifest(directory)})
    for name, lineno, line in iter_shard_lines(directory, manifest):
        stats.total += 1
        try:
            record = parse_record_line(line)
            violations = record.violations()
            cls = classify_action(record.trace.script)
        except (DatasetError, TraceError) as e:
            stats.invalid += 1
            stats.problems.append(f"{name}:{lineno}: {e}")
            continue
        if violations:
            stats.invalid += 1
            stats.problems.append(f"{name}:{lineno}: {', '.join(v.name for v in violations)}")
            continue
        stats.cells[(record.modality, record.trace.action_type, cls)] += 1
    return stats
