"""Actsynth - action-grounding data synthesis and multi-point evaluation."""

from actsynth.dataset_io import DatasetRecord, ShardWriter, mix_stream, read_shards
from actsynth.errors import ActsynthError, ConfigError, DatasetError, SuiteSchemaError
from actsynth.eval_engine import BenchmarkSample, Prediction, Report, evaluate_suite, judge_sample
from actsynth.taskgen import build_llm_request, parse_llm_response, template_generate
from actsynth.trace_dsl import parse_trace, validate_trace

__all__ = [
    "ActsynthError",
    "BenchmarkSample",
    "ConfigError",
    "DatasetError",
    "DatasetRecord",
    "Prediction",
    "Report",
    "ShardWriter",
    "SuiteSchemaError",
    "build_llm_request",
    "evaluate_suite",
    "judge_sample",
    "mix_stream",
    "parse_llm_response",
    "parse_trace",
    "read_shards",
    "template_generate",
    "validate_trace",
]
