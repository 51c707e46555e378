"""Shallow-parse linter for common failure modes of LLM-generated RTL."""

from .parse import Decl, ParsedFile, Port, Range, ShallowModule, parse_source
from .rules import (
    RULES,
    THRESHOLDS,
    LintFinding,
    detect_corrupt_regions,
    detect_range_violations,
    detect_redundant_decls,
    detect_repetition,
    detect_suffix_chains,
    detect_unused_ports,
    findings_to_json,
    findings_to_text,
    lint_files,
    lint_source,
    rule_counts,
)

__all__ = [
    "Decl", "LintFinding", "ParsedFile", "Port", "RULES", "Range", "ShallowModule", "THRESHOLDS",
    "detect_corrupt_regions", "detect_range_violations", "detect_redundant_decls",
    "detect_repetition", "detect_suffix_chains", "detect_unused_ports", "findings_to_json",
    "findings_to_text", "lint_files", "lint_source", "parse_source", "rule_counts",
]
