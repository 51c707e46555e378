"""Per-policy experiment reports (one row per label and policy)."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .._io import atomic_write_text
from ..rtllint import RULES, THRESHOLDS, LintFinding, detect_repetition, lint_files, rule_counts
from ..score import ScoreReport, score_design
from .transcript import Transcript

FORMAT_VERSION = 1
BASE_COLUMNS = ("label", "policy", "ref_tokens", "fix_cost", "success_pct", "correct_pct", "lint_total")
LINT_COLUMNS = tuple(f"lint_{r.replace('-', '_')}" for r in RULES)

# published totals: reference size, tokens to fix per policy, correct tokens under sink
PUBLISHED_REF_TOKENS = 4312
PUBLISHED_FIX_COST = {"sink": 16, "dense": 249, "window": 1957}
PUBLISHED_SINK_MATCHED = 4293

_FENCE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


@dataclass
class ReportRow:
    label: str
    policy: str
    score: ScoreReport
    lint: dict = field(default_factory=dict)
    source: str = ""

    @property
    def lint_total(self) -> Optional[int]:
        return sum(self.lint.values()) if self.lint else None

    def csv_values(self) -> list:
        s = self.score
        vals = [self.label, self.policy, s.ref_tokens, s.fix_cost, f"{s.success_pct:.2f}",
                "" if s.correct_pct is None else f"{s.correct_pct:.2f}",
                "" if self.lint_total is None else self.lint_total]
        vals += ["" if not self.lint else self.lint.get(r, 0) for r in RULES]
        return vals

    def to_dict(self) -> dict:
        return {"label": self.label, "policy": self.policy, "source": self.source,
                "score": self.score.to_dict(), "lint": dict(self.lint)}


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    config: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BASE_COLUMNS + LINT_COLUMNS)
        for row in self.rows:
            w.writerow(row.csv_values())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"format_version": FORMAT_VERSION, "config": self.config,
                           "rows": [r.to_dict() for r in self.rows]}, indent=2) + "\n"

    def write(self, csv_path: Union[str, Path, None] = None,
              json_path: Union[str, Path, None] = None) -> None:
        if csv_path is not None:
            atomic_write_text(Path(csv_path), self.to_csv())
        if json_path is not None:
            atomic_write_text(Path(json_path), self.to_json())


def report_aggregate(rows: Iterable[ReportRow], config: Optional[Mapping] = None) -> ExperimentReport:
    """Collect rows into a report. Rows keep their given order."""
    rows = list(rows)
    if not rows:
        raise ValueError("report needs at least one row")
    keys = [(r.label, r.policy) for r in rows]
    dup = {k for k in keys if keys.count(k) > 1}
    if dup:
        raise ValueError(f"duplicate (label, policy) rows: {sorted(dup)}")
    snapshot = {"lint_thresholds": THRESHOLDS, "token_identity": "(kind, lexeme)", **(config or {})}
    return ExperimentReport(rows, snapshot)


def published_rows(label: str = "published") -> list[ReportRow]:
    """Rows rebuilt from the published token counts (no alignment available)."""
    out = []
    for policy, fix in PUBLISHED_FIX_COST.items():
        matched = PUBLISHED_SINK_MATCHED if policy == "sink" else None
        out.append(ReportRow(label, policy, ScoreReport.from_counts(PUBLISHED_REF_TOKENS, fix, matched),
                             source="published counts"))
    return out


def extract_code(completion: str) -> str:
    """Fenced code blocks of a completion joined together, or the whole text."""
    blocks = _FENCE.findall(completion)
    return "\n".join(blocks) if blocks else completion


def mask_prose(completion: str) -> str:
    """Completion with everything outside fenced blocks blanked to spaces.

    Newlines and byte lengths are kept so lint spans still point into the
    original text. Without fences the text is returned unchanged.
    """
    spans = [m.span(1) for m in _FENCE.finditer(completion)]
    if not spans:
        return completion
    parts, pos = [], 0
    for a, b in spans + [(len(completion), len(completion))]:
        parts.extend(c if c == "\n" else " " * len(c.encode("utf-8", "surrogateescape"))
                     for c in completion[pos:a])
        parts.append(completion[a:b])
        pos = b
    return "".join(parts)


def lint_completion(completion: str, source: str = "<completion>") -> list[LintFinding]:
    """Lint the code of a completion and check its full text for repeated prose."""
    findings = lint_files([(source, mask_prose(completion))])
    seen = {(f.rule, f.span) for f in findings}
    extra = [f for f in detect_repetition(completion, source) if (f.rule, f.span) not in seen]
    return sorted(findings + extra, key=LintFinding.sort_key)


def evaluate_completion(completion: str, reference: Mapping[str, Union[str, bytes]],
                        label: str, policy: str, source: str = "") -> tuple[ReportRow, list[LintFinding]]:
    """Score a completion against reference modules and lint it."""
    code = extract_code(completion)
    score = score_design(reference, [code])
    findings = lint_completion(completion, source or "<completion>")
    return ReportRow(label, policy, score, rule_counts(findings), source), findings


def evaluate_transcript(transcript: Transcript, reference: Mapping[str, Union[str, bytes]],
                        source: str = "") -> tuple[ReportRow, list[LintFinding]]:
    return evaluate_completion(transcript.completion, reference,
                               transcript.label or transcript.model, transcript.policy, source)


def load_reference(paths: Sequence[Union[str, Path]]) -> dict[str, bytes]:
    """Read reference sources; directories contribute every ``*.sv``/``*.v`` file inside."""
    files: dict[str, bytes] = {}
    for p in map(Path, paths):
        members = sorted([*p.glob("*.sv"), *p.glob("*.v")]) if p.is_dir() else [p]
        for f in members:
            files[str(f)] = f.read_bytes()
    if not files:
        raise ValueError("no reference sources found")
    return files
