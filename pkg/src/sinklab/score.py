"""Token-level error-rate scoring of generated RTL against a reference.

The fix cost of a generation is the unit-cost Levenshtein distance between
reference and generated token streams, where token identity is the pair
(kind, lexeme). Spurious generated tokens count as deletions needed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Hashable, Mapping, Optional, Sequence

import numpy as np

from .vlex import Kind, Source, VToken, VTokenStream, tokenize

MATCH, SUB, INS, DEL = "match", "sub", "ins", "del"
CSV_FIELDS = ("ref_tokens", "fix_cost", "success_pct", "correct_pct")


@dataclass(frozen=True)
class EditOp:
    """One alignment column. ``ins`` means a reference token missing from the
    generation; ``del`` means a generated token absent from the reference."""

    op: str
    ref_index: Optional[int]
    gen_index: Optional[int]


def _encode(ref: Sequence[Hashable], gen: Sequence[Hashable]) -> tuple[np.ndarray, np.ndarray]:
    table: dict[Hashable, int] = {}
    a = np.fromiter((table.setdefault(x, len(table)) for x in ref), dtype=np.int64, count=len(ref))
    b = np.fromiter((table.setdefault(x, len(table)) for x in gen), dtype=np.int64, count=len(gen))
    return a, b


def _as_keys(stream) -> list:
    if isinstance(stream, VTokenStream):
        return stream.keys()
    return [t.key if isinstance(t, VToken) else t for t in stream]


def _dp_table(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full (len(a)+1, len(b)+1) edit-distance table, one vectorised row at a time."""
    n, m = len(a), len(b)
    D = np.empty((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1, dtype=np.int64)
    D[0] = cols
    for i in range(1, n + 1):
        prev = D[i - 1]
        t = np.empty(m + 1, dtype=np.int64)
        t[0] = i
        t[1:] = np.minimum(prev[1:] + 1, prev[:-1] + (b != a[i - 1]))
        # horizontal moves: D[i][j] = min_k<=j (t[k] + j - k)
        D[i] = np.minimum.accumulate(t - cols) + cols
    return D


def token_edit_distance(ref, gen) -> tuple[int, list[EditOp]]:
    """Minimal unit-cost edit script turning ``gen`` into ``ref``.

    Inputs are token streams or plain sequences of hashable items. Returns
    the distance and one optimal alignment; ties prefer diagonal moves.
    """
    a, b = _encode(_as_keys(ref), _as_keys(gen))
    D = _dp_table(a, b)
    i, j = len(a), len(b)
    ops: list[EditOp] = []
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            same = a[i - 1] == b[j - 1]
            if D[i, j] == D[i - 1, j - 1] + (0 if same else 1):
                ops.append(EditOp(MATCH if same else SUB, i - 1, j - 1))
                i, j = i - 1, j - 1
                continue
        if i > 0 and D[i, j] == D[i - 1, j] + 1:
            ops.append(EditOp(INS, i - 1, None))
            i -= 1
        else:
            ops.append(EditOp(DEL, None, j - 1))
            j -= 1
    ops.reverse()
    return int(D[len(a), len(b)]), ops


@dataclass
class ScoreReport:
    """Outcome of scoring one generation (or an aggregate of several).

    ``success_pct = 100 * max(0, N - F) / N`` and
    ``correct_pct = 100 * M / N`` with N reference tokens, F fix cost and
    M matched tokens. Counts may be unknown (None) when a report is built
    from published totals rather than an alignment.
    """

    ref_tokens: int
    fix_cost: int
    matched: Optional[int] = None
    substitutions: Optional[int] = None
    insertions: Optional[int] = None
    deletions: Optional[int] = None
    gen_tokens: Optional[int] = None
    modules: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ref_tokens <= 0:
            raise ValueError("reference must contain at least one token")
        if self.fix_cost < 0:
            raise ValueError("fix_cost must be nonnegative")

    @classmethod
    def from_counts(cls, ref_tokens: int, fix_cost: int, matched: Optional[int] = None) -> "ScoreReport":
        return cls(ref_tokens=ref_tokens, fix_cost=fix_cost, matched=matched)

    @property
    def success_pct(self) -> float:
        return 100.0 * max(0, self.ref_tokens - self.fix_cost) / self.ref_tokens

    @property
    def correct_pct(self) -> Optional[float]:
        if self.matched is None:
            return None
        return 100.0 * self.matched / self.ref_tokens

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modules"] = {k: v.to_dict() for k, v in self.modules.items()}
        d["success_pct"] = self.success_pct
        d["correct_pct"] = self.correct_pct
        return d

    def to_json(self) -> str:
        return json.dumps({"format_version": 1, **self.to_dict()}, indent=2)

    def csv_row(self) -> str:
        buf = io.StringIO()
        correct = "" if self.correct_pct is None else f"{self.correct_pct:.2f}"
        csv.writer(buf, lineterminator="\n").writerow(
            [self.ref_tokens, self.fix_cost, f"{self.success_pct:.2f}", correct])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScoreReport":
        mods = {k: cls.from_dict(v) for k, v in (d.get("modules") or {}).items()}
        return cls(ref_tokens=d["ref_tokens"], fix_cost=d["fix_cost"], matched=d.get("matched"),
                   substitutions=d.get("substitutions"), insertions=d.get("insertions"),
                   deletions=d.get("deletions"), gen_tokens=d.get("gen_tokens"), modules=mods)


def _score_streams(ref: VTokenStream | list, gen: VTokenStream | list) -> ScoreReport:
    if len(ref) == 0:
        raise ValueError("reference has no tokens; success percentage is undefined")
    distance, ops = token_edit_distance(ref, gen)
    counts = {MATCH: 0, SUB: 0, INS: 0, DEL: 0}
    for op in ops:
        counts[op.op] += 1
    return ScoreReport(ref_tokens=len(ref), fix_cost=distance, matched=counts[MATCH],
                       substitutions=counts[SUB], insertions=counts[INS],
                       deletions=counts[DEL], gen_tokens=len(gen))


def score_pair(ref_source: Source, gen_source: Source) -> ScoreReport:
    """Tokenize both sources and score the generation against the reference."""
    return _score_streams(tokenize(ref_source), tokenize(gen_source))


def split_modules(source: Source) -> dict[str, list[VToken]]:
    """Token lists of each ``module <name> ... endmodule`` block, by name.

    A module missing its ``endmodule`` runs to the next ``module`` keyword
    or end of input. Raises on duplicate names.
    """
    tokens = tokenize(source).tokens
    starts = [i for i, t in enumerate(tokens)
              if t.kind is Kind.KEYWORD and t.text in ("module", "macromodule")
              and i + 1 < len(tokens) and tokens[i + 1].kind is Kind.IDENTIFIER]
    out: dict[str, list[VToken]] = {}
    for k, start in enumerate(starts):
        stop = starts[k + 1] if k + 1 < len(starts) else len(tokens)
        for j in range(start, stop):
            if tokens[j].kind is Kind.KEYWORD and tokens[j].text == "endmodule":
                stop = j + 1
                break
        name = tokens[start + 1].text
        if name in out:
            raise ValueError(f"duplicate module name {name!r}")
        out[name] = tokens[start:stop]
    return out


def _collect(sources) -> dict[str, list[VToken]]:
    if isinstance(sources, (str, bytes)):
        sources = [sources]
    elif isinstance(sources, Mapping):
        sources = list(sources.values())
    merged: dict[str, list[VToken]] = {}
    for src in sources:
        for name, toks in split_modules(src).items():
            if name in merged:
                raise ValueError(f"duplicate module name {name!r}")
            merged[name] = toks
    return merged


def score_design(ref_files, gen_files) -> ScoreReport:
    """Score a multi-module generation module by module.

    Modules pair up by name. A reference module absent from the generation
    costs its full token count; an extra generated module costs its token
    count as deletions. Totals are token-weighted sums, and the per-module
    breakdown is kept in ``modules`` (sorted by name).
    """
    ref = _collect(ref_files)
    gen = _collect(gen_files)
    if not ref:
        raise ValueError("reference set contains no modules")
    per: dict[str, ScoreReport] = {}
    for name in sorted(ref):
        if name in gen:
            per[name] = _score_streams(ref[name], gen[name])
        else:
            n = len(ref[name])
            per[name] = ScoreReport(ref_tokens=n, fix_cost=n, matched=0, substitutions=0,
                                    insertions=n, deletions=0, gen_tokens=0)
    extra_tokens = sum(len(gen[name]) for name in gen if name not in ref)
    total = ScoreReport(
        ref_tokens=sum(r.ref_tokens for r in per.values()),
        fix_cost=sum(r.fix_cost for r in per.values()) + extra_tokens,
        matched=sum(r.matched for r in per.values()),
        substitutions=sum(r.substitutions for r in per.values()),
        insertions=sum(r.insertions for r in per.values()),
        deletions=sum(r.deletions for r in per.values()) + extra_tokens,
        gen_tokens=sum(len(t) for t in gen.values()),
        modules=per,
    )
    return total
