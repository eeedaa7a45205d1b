"""Run configuration: YAML file values layered over dataclass defaults."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from actsynth.dataset_io import SHARD_SIZE, MixWeights
from actsynth.errors import ConfigError, DatasetError
from actsynth.eval_engine import MODALITIES

DEFAULT_COUNT = 100
DEFAULT_RECORDS_PER_TASK = 1


@dataclass
class LlmConfig:
    base_url: str | None = None
    model: str = "gpt-4o"
    params: dict[str, Any] = field(default_factory=dict)
    max_concurrency: int = 4
    timeout_s: float = 120.0
    max_retries: int = 4
    debug_log: Path | None = None


@dataclass
class RunConfig:
    seed: int | str = 0
    output: Path = Path("out")
    counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(MODALITIES, DEFAULT_COUNT))
    records_per_task: int = DEFAULT_RECORDS_PER_TASK
    shard_size: int = SHARD_SIZE
    workers: int = 1
    mix: MixWeights | None = None
    image_sizes: dict[str, tuple[int, int]] = field(default_factory=dict)
    llm: LlmConfig | None = None

    def count(self, modality: str) -> int:
        return self.counts.get(modality, DEFAULT_COUNT)


def _non_negative_int(value: Any, key: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key}: expected an integer >= {minimum}, got {value!r}")
    return value


def _size(value: Any, key: str) -> tuple[int, int]:
    if not isinstance(value, list | tuple) or len(value) != 2:
        raise ConfigError(f"{key}: expected [width, height], got {value!r}")
    w, h = (_non_negative_int(v, key, 1) for v in value)
    return w, h


def _llm(raw: Any) -> LlmConfig:
    if not isinstance(raw, dict):
        raise ConfigError("llm: expected a mapping")
    known = {f.name for f in fields(LlmConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"llm: unknown keys {unknown}")
    cfg = LlmConfig(**raw)
    if not isinstance(cfg.params, dict):
        raise ConfigError("llm.params: expected a mapping")
    cfg.max_concurrency = _non_negative_int(cfg.max_concurrency, "llm.max_concurrency", 1)
    cfg.max_retries = _non_negative_int(cfg.max_retries, "llm.max_retries")
    if not isinstance(cfg.timeout_s, int | float) or cfg.timeout_s <= 0:
        raise ConfigError(f"llm.timeout_s: expected a positive number, got {cfg.timeout_s!r}")
    if cfg.debug_log is not None:
        cfg.debug_log = Path(cfg.debug_log)
    return cfg


def parse_run_config(data: Any) -> RunConfig:
    if data is None:
        return RunConfig()
    if not isinstance(data, dict):
        raise ConfigError("run config must be a mapping")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys {unknown}")

    cfg = RunConfig()
    if "seed" in data:
        if isinstance(data["seed"], bool) or not isinstance(data["seed"], int | str):
            raise ConfigError(f"seed: expected an integer or string, got {data['seed']!r}")
        cfg.seed = data["seed"]
    if "output" in data:
        cfg.output = Path(data["output"])
    for key, value in (data.get("counts") or {}).items():
        if key not in MODALITIES:
            raise ConfigError(f"counts.{key}: unknown modality")
        cfg.counts[key] = _non_negative_int(value, f"counts.{key}")
    if "records_per_task" in data:
        cfg.records_per_task = _non_negative_int(data["records_per_task"], "records_per_task", 1)
    if "shard_size" in data:
        cfg.shard_size = _non_negative_int(data["shard_size"], "shard_size", 1)
    if "workers" in data:
        cfg.workers = _non_negative_int(data["workers"], "workers", 1)
    if data.get("mix") is not None:
        try:
            cfg.mix = MixWeights(dict(data["mix"]))
        except (DatasetError, TypeError, ValueError) as e:
            raise ConfigError(f"mix: {e}") from e
    for key, value in (data.get("image_sizes") or {}).items():
        if key not in MODALITIES:
            raise ConfigError(f"image_sizes.{key}: unknown modality")
        cfg.image_sizes[key] = _size(value, f"image_sizes.{key}")
    if data.get("llm") is not None:
        cfg.llm = _llm(data["llm"])
    return cfg


def load_run_config(path: Path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: invalid YAML: {e}") from e
    return parse_run_config(data)
