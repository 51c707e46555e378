"""Driving completions (local or remote), transcripts, and reports."""

from .client import API_KEY_ENV, BACKOFF, ENDPOINT_ENV, EndpointConfig, run_remote
from .report import (
    BASE_COLUMNS,
    ExperimentReport,
    ReportRow,
    evaluate_completion,
    evaluate_transcript,
    extract_code,
    lint_completion,
    mask_prose,
    load_reference,
    published_rows,
    report_aggregate,
)
from .transcript import DEFAULT_PARAMS, Transcript, local_transcript, replay

__all__ = [
    "API_KEY_ENV", "BACKOFF", "BASE_COLUMNS", "DEFAULT_PARAMS", "ENDPOINT_ENV", "EndpointConfig",
    "ExperimentReport", "ReportRow", "Transcript", "evaluate_completion", "evaluate_transcript",
    "extract_code", "lint_completion", "load_reference", "mask_prose", "local_transcript", "published_rows", "replay",
    "report_aggregate", "run_remote",
]
