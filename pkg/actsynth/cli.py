"""Command-line entry point: generate, evaluate, validate, summarize and mix datasets.

Exit status is 0 on success, 1 when validation finds problems and 2 for
configuration or IO errors.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import random
import shutil
import sys
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Any

from PIL import Image
from tqdm import tqdm

from actsynth.canvas.scene import generate_scene
from actsynth.config import LlmConfig, RunConfig, load_run_config, parse_run_config
from actsynth.dataset_io import (
    IMAGE_DIR,
    MIX_SOURCES,
    DatasetRecord,
    MixWeights,
    ShardWriter,
    dataset_stats,
    iter_shard_lines,
    mix_stream,
    parse_record_line,
    read_manifest,
    read_shards,
    save_image,
    verify_manifest,
)
from actsynth.errors import ActsynthError, ConfigError, DatasetError, SuiteSchemaError
from actsynth.eval_engine import (
    FLUCTUATION_POINTS,
    evaluate_suite,
    load_predictions,
    load_suite,
    sample_to_dict,
    write_report,
)
from actsynth.gui import GuiScene, load_gui_source
from actsynth.image_annot import build_image_scene, load_image_source
from actsynth.llm_client import LlmClient
from actsynth.table_synth import DEFAULT_TARGET, generate_table
from actsynth.taskgen import Scene, build_llm_request, parse_llm_response, synthesizable_tasks, template_generate
from actsynth.text_synth import generate_text_page, load_backgrounds

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ERROR = 2
GEN_MODALITIES = {"canvas": "Canvas", "table": "Table", "text": "Text", "gui": "GUI", "image": "Image"}


# -- generation


@dataclass(frozen=True)
class SceneJob:
    modality: str
    seed: int | str
    index: int
    image_dir: Path
    records_per_task: int = 1
    image_size: tuple[int, int] | None = None
    source: Path | None = None
    backgrounds: Path | None = None


@lru_cache(maxsize=4)
def _gui_scenes(path: Path) -> list[GuiScene]:
    return load_gui_source(path)


@lru_cache(maxsize=4)
def _image_sources(path: Path):
    return load_image_source(path)


@lru_cache(maxsize=4)
def _backgrounds(path: Path):
    return load_backgrounds(path)


def source_size(modality: str, source: Path) -> int:
    if modality == "GUI":
        return len(_gui_scenes(source))
    return len(_image_sources(source))


def build_scene(job: SceneJob) -> tuple[Scene, Image.Image]:
    """The job's scene and the image records will reference."""
    if job.modality == "Canvas":
        scene = generate_scene(job.seed, job.index)
        return scene, scene.image
    if job.modality == "Table":
        scene = generate_table(job.seed, job.index, target_size=job.image_size or DEFAULT_TARGET)
        return scene, scene.image
    if job.modality == "Text":
        backgrounds = _backgrounds(job.backgrounds) if job.backgrounds else None
        page = generate_text_page(job.seed, job.index, backgrounds=backgrounds)
        return page, page.image
    if job.source is None:
        raise ConfigError(f"gen {job.modality.lower()} needs --source")
    if job.modality == "GUI":
        gui = _gui_scenes(job.source)[job.index]
        gui = replace(gui, id=f"gui_{job.index:06d}")
        with Image.open(gui.image_ref) as im:
            return gui, im.convert("RGB")
    image = build_image_scene(_image_sources(job.source)[job.index], job.index)
    with Image.open(image.image_ref) as im:
        return image, im.convert("RGB")


def synthesize(job: SceneJob) -> list[DatasetRecord]:
    """Template records for every synthesizable task on one scene; runs in worker processes."""
    scene, image = build_scene(job)
    name = save_image(image, job.image_dir)
    records = []
    for task in synthesizable_tasks(job.modality):
        rng = random.Random(f"{job.seed}/{job.modality}/{job.index}/{task.key}")
        records.extend(template_generate(scene, task, rng, image_ref=name, count=job.records_per_task))
    return records


def _jobs(modality: str, cfg: RunConfig, count: int, args: argparse.Namespace) -> list[SceneJob]:
    return [
        SceneJob(
            modality,
            cfg.seed,
            i,
            cfg.output / IMAGE_DIR,
            cfg.records_per_task,
            cfg.image_sizes.get(modality),
            args.source,
            args.backgrounds,
        )
        for i in range(count)
    ]


def _template_records(jobs: list[SceneJob], workers: int, quiet: bool) -> Iterator[DatasetRecord]:
    bar = dict(total=len(jobs), desc=f"gen {jobs[0].modality}" if jobs else "gen", disable=quiet, unit="scene")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in tqdm(pool.map(synthesize, jobs), **bar):
                yield from batch
    else:
        for job in tqdm(jobs, **bar):
            yield from synthesize(job)


def _llm_records(jobs: list[SceneJob], llm: LlmConfig, quiet: bool) -> Iterator[DatasetRecord]:
    client = LlmClient(
        base_url=llm.base_url,
        model=llm.model,
        params=llm.params,
        timeout_s=llm.timeout_s,
        max_retries=llm.max_retries,
        debug_path=llm.debug_log,
    )
    scenes, requests_ = [], []
    for job in tqdm(jobs, desc="scenes", disable=quiet, unit="scene"):
        scene, image = build_scene(job)
        name = save_image(image, job.image_dir)
        rng = random.Random(f"{job.seed}/{job.modality}/{job.index}/llm")
        requests_.append(build_llm_request(job.modality, scene, rng, image_ref=name, image_path=job.image_dir / name))
        scenes.append(scene)
    completions = client.complete_many(requests_, llm.max_concurrency)
    for scene, completion in zip(scenes, completions, strict=True):
        parsed = parse_llm_response(completion.text, scene, image_ref=completion.request.image_ref)
        logger.info("%s: %d accepted, %d rejected", scene.id, len(parsed.accepted), len(parsed.rejected))
        yield from parsed.accepted


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config) if getattr(args, "config", None) else parse_run_config(None)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.output = args.out
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    if getattr(args, "shard_size", None) is not None:
        cfg.shard_size = args.shard_size
    if getattr(args, "records_per_task", None) is not None:
        cfg.records_per_task = args.records_per_task
    if cfg.workers < 1 or cfg.shard_size < 1 or cfg.records_per_task < 1:
        raise ConfigError("--workers, --shard-size and --records-per-task must be positive")
    return cfg


def cmd_gen(args: argparse.Namespace) -> int:
    modality = GEN_MODALITIES[args.modality]
    cfg = _run_config(args)
    count = args.count if args.count is not None else cfg.count(modality)
    if count < 0:
        raise ConfigError("--count must be >= 0")
    if modality in ("GUI", "Image"):
        if args.source is None:
            raise ConfigError(f"gen {args.modality} needs --source")
        if not args.source.is_file():
            raise ConfigError(f"source file not found: {args.source}")
        available = source_size(modality, args.source)
        if count > available:
            logger.warning("source has %d entries; generating %d scenes instead of %d", available, available, count)
            count = available

    jobs = _jobs(modality, cfg, count, args)
    if args.llm:
        llm = cfg.llm or LlmConfig()
        records = _llm_records(jobs, llm, args.quiet)
    else:
        records = _template_records(jobs, cfg.workers, args.quiet)

    with ShardWriter(cfg.output, cfg.shard_size) as writer:
        writer.write_many(records)
    manifest = writer.manifest
    print(f"{modality}: {count} scenes, {manifest.total} records in {len(manifest.shards)} shards -> {cfg.output}")
    return EXIT_OK


# -- evaluation and inspection


def _require(path: Path) -> Path:
    if not path.exists():
        raise ConfigError(f"not found: {path}")
    return path


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        samples = load_suite(_require(args.suite))
        predictions = load_predictions(_require(args.predictions))
    except SuiteSchemaError as e:
        print(f"Schema error: {e}", file=sys.stderr)
        return EXIT_INVALID
    report = evaluate_suite(samples, predictions, workers=args.workers)
    if args.report is not None:
        write_report(report, args.report)

    print(f"Overall: {report.overall_success_rate * 100:.1f} ({report.successes}/{report.total})")
    for modality, rate in report.per_modality.items():
        print(f"  {modality:<8} {rate * 100:.1f}")
    print(f"Differences within +/-{FLUCTUATION_POINTS:.0f} points are within run-to-run fluctuation.")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    directory = _require(args.dataset)
    problems = [f"manifest: {e}" for e in verify_manifest(directory)]
    checked = 0
    for name, lineno, line in iter_shard_lines(directory):
        checked += 1
        try:
            record = parse_record_line(line)
        except DatasetError as e:
            problems.append(f"{name}:{lineno}: {e}")
            continue
        violations = record.violations()
        if violations:
            problems.append(f"{name}:{lineno}: " + "; ".join(str(v) for v in violations))

    for problem in problems:
        print(problem)
    print(f"{checked} records checked, {len(problems)} problems")
    return EXIT_INVALID if problems else EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    stats = dataset_stats(_require(args.dataset))
    print(f"{'modality':<8} {'action type':<40} {'class':<15} {'count':>8}")
    for (modality, action_type, cls), n in sorted(stats.cells.items()):
        print(f"{modality:<8} {action_type:<40} {cls:<15} {n:>8}")
    for modality, n in sorted(stats.by_modality().items()):
        print(f"total {modality}: {n}")
    print(f"records: {stats.total} (manifest {stats.manifest_total}), invalid: {stats.invalid}")
    for shard in stats.corrupt_shards:
        print(f"corrupt shard: {shard}")
    for problem in stats.problems[: args.show]:
        print(f"  {problem}")
    if args.release and not stats.release_ready:
        print("not release-ready", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def cmd_export_suite(args: argparse.Namespace) -> int:
    """Write records that carry target regions as a benchmark suite file."""
    samples = []
    for i, record in enumerate(read_shards(_require(args.dataset))):
        if record.targets is not None and record.targets.correct:
            samples.append(sample_to_dict(record.as_sample(f"{record.modality.lower()}_{i:06d}")))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps({"samples": samples}, indent=2) + "\n", encoding="utf-8")
    print(f"{len(samples)} samples -> {args.out}")
    return EXIT_OK


# -- mixing


def _pairs(values: Sequence[str], flag: str) -> dict[str, str]:
    out = {}
    for value in values:
        key, sep, rest = value.partition("=")
        if not sep or key not in MIX_SOURCES:
            raise ConfigError(f"{flag} expects MODALITY=VALUE with MODALITY in {', '.join(MIX_SOURCES)}, got {value!r}")
        out[key] = rest
    return out


def _copy_images(records: Iterator[DatasetRecord], source: Path, target: Path) -> Iterator[DatasetRecord]:
    target.mkdir(parents=True, exist_ok=True)
    for record in records:
        dst = target / record.image
        if not dst.exists():
            src = source / IMAGE_DIR / record.image
            if not src.is_file():
                raise DatasetError(f"{source}: unresolvable image reference {record.image!r}")
            shutil.copy2(src, dst)
        yield record


def cmd_mix(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    sources = {k: _require(Path(v)) for k, v in _pairs(args.source, "--source").items()}
    if args.weights:
        try:
            weights = MixWeights.normalized({k: float(v) for k, v in _pairs(args.weights, "--weights").items()})
        except (ValueError, DatasetError) as e:
            raise ConfigError(f"--weights: {e}") from e
    else:
        weights = cfg.mix or MixWeights.default()
    for key in sources:
        read_manifest(sources[key])

    image_dir = cfg.output / IMAGE_DIR
    streams = {k: _copy_images(read_shards(d), d, image_dir) for k, d in sources.items()}
    mixed = (record for _, record in mix_stream(streams, weights, random.Random(f"{cfg.seed}/mix")))
    with ShardWriter(cfg.output, cfg.shard_size) as writer:
        writer.write_many(itertools.islice(mixed, args.count))
    manifest = writer.manifest
    if manifest.total < args.count:
        logger.warning("sources ran out after %d of %d records", manifest.total, args.count)
    for modality, n in sorted(manifest.by_modality.items()):
        share = n / manifest.total if manifest.total else 0.0
        print(f"{modality:<8} {n:>8} {share:6.3f}")
    print(f"{manifest.total} records -> {cfg.output}")
    return EXIT_OK


# -- argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="actsynth", description="Synthesize and evaluate action-grounding data.")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings only, no progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate scenes and training records for one modality")
    gen.add_argument("modality", choices=sorted(GEN_MODALITIES))
    gen.add_argument("--config", type=Path, default=None, help="YAML run config")
    gen.add_argument("--count", type=int, default=None, help="Number of scenes")
    gen.add_argument("--seed", default=None, help="Global seed")
    gen.add_argument("--out", type=Path, default=None, help="Output dataset directory")
    gen.add_argument("--workers", type=int, default=None, help="Worker processes")
    gen.add_argument("--shard-size", type=int, default=None, help="Records per shard")
    gen.add_argument("--records-per-task", type=int, default=None, help="Records per detailed task and scene")
    gen.add_argument("--source", type=Path, default=None, help="Element or caption file (gui, image)")
    gen.add_argument("--backgrounds", type=Path, default=None, help="Background directory (text)")
    gen.add_argument("--llm", action="store_true", help="Generate through the configured LLM endpoint")
    gen.set_defaults(func=cmd_gen)

    ev = sub.add_parser("eval", help="Judge predictions against a benchmark suite")
    ev.add_argument("suite", type=Path)
    ev.add_argument("predictions", type=Path)
    ev.add_argument("--report", type=Path, default=None, help="Write the JSON report here")
    ev.add_argument("--workers", type=int, default=1)
    ev.set_defaults(func=cmd_eval)

    val = sub.add_parser("validate", help="Check every record of a dataset")
    val.add_argument("dataset", type=Path)
    val.set_defaults(func=cmd_validate)

    st = sub.add_parser("stats", help="Counts by modality, action type and key-point class")
    st.add_argument("dataset", type=Path)
    st.add_argument("--release", action="store_true", help="Exit 1 on any invalid record or corrupt shard")
    st.add_argument("--show", type=int, default=20, help="Problems to list")
    st.set_defaults(func=cmd_stats)

    ex = sub.add_parser("export-suite", help="Turn records with target regions into a benchmark suite")
    ex.add_argument("dataset", type=Path)
    ex.add_argument("--out", type=Path, required=True)
    ex.set_defaults(func=cmd_export_suite)

    mix = sub.add_parser("mix", help="Interleave per-modality datasets by weight")
    mix.add_argument("--source", action="append", default=[], required=True, metavar="MODALITY=DIR")
    mix.add_argument("--weights", action="append", default=[], metavar="MODALITY=WEIGHT")
    mix.add_argument("--count", type=int, required=True)
    mix.add_argument("--out", type=Path, required=True)
    mix.add_argument("--seed", default=None)
    mix.add_argument("--config", type=Path, default=None)
    mix.add_argument("--shard-size", type=int, default=None)
    mix.set_defaults(func=cmd_mix)
    return parser


def _seed(value: Any) -> int | str:
    try:
        return int(value)
    except (TypeError, ValueError):
        return value


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "seed", None) is not None:
        args.seed = _seed(args.seed)

    try:
        return args.func(args)
    except (ConfigError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except ActsynthError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
