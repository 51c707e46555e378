"""Failure-mode detectors for generated RTL.

One rule id per failure class. Findings carry a ``check`` sub-label where a
rule groups several checks (e.g. ``redundant-decl`` covers unused
declarations and declaration groups copied across modules).
"""

from __future__ import annotations

import difflib
import json
import re
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

from ..vlex import Kind, Source, Span, VToken, tokenize
from .parse import ParsedFile, ShallowModule, _match, parse_source

CHAIN_MIN = 4
REPEAT_MIN_LINES = 3
REPEAT_SIMILARITY = 0.8
GROUP_MIN = 3
GARBAGE_FRACTION = 0.5
GARBAGE_MIN_TOKENS = 3
SYMBOL_RUN_MIN = 3

THRESHOLDS = {
    "suffix_chain_min": CHAIN_MIN,
    "repetition_min_lines": REPEAT_MIN_LINES,
    "repetition_similarity": REPEAT_SIMILARITY,
    "decl_group_min": GROUP_MIN,
    "garbage_fraction": GARBAGE_FRACTION,
    "symbol_run_min": SYMBOL_RUN_MIN,
}

ERROR, WARNING = "error", "warning"


@dataclass(frozen=True)
class Rule:
    id: str
    severity: str
    summary: str


RULES = {r.id: r for r in (
    Rule("redundant-decl", WARNING, "declarations never used, or declaration groups copied across modules"),
    Rule("suffix-chain", WARNING, "identifier families grown by repeatedly appending _word suffixes"),
    Rule("spec-repetition", WARNING, "consecutive near-identical prose lines"),
    Rule("corrupt-output", ERROR, "unlexable bytes or lines dominated by operator garbage"),
    Rule("size-mismatch", ERROR, "part-selects outside the declared range or slice/destination width mismatch"),
    Rule("unused-port", WARNING, "ports never referenced in the module body"),
)}


@dataclass(frozen=True)
class LintFinding:
    rule: str
    severity: str
    file: str
    span: Span
    message: str
    evidence: tuple[str, ...] = ()
    check: str = ""

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule id {self.rule!r}")

    @property
    def line(self) -> int:
        return self.span.line

    @property
    def col(self) -> int:
        return self.span.col

    def sort_key(self):
        return (self.file, self.span.offset, self.span.length, self.rule, self.check)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "check": self.check, "severity": self.severity,
                "file": self.file, "line": self.span.line, "col": self.span.col,
                "offset": self.span.offset, "length": self.span.length,
                "message": self.message, "evidence": list(self.evidence)}

    def to_text(self) -> str:
        return f"{self.file}:{self.span.line}:{self.span.col}: {self.severity}: [{self.rule}] {self.message}"


def _finding(rule: str, file: str, span: Span, message: str, evidence=(), check: str = "") -> LintFinding:
    return LintFinding(rule, RULES[rule].severity, file, span, message, tuple(evidence), check or rule)


def _cover(first: VToken, last: VToken) -> Span:
    a, b = first.span, last.span
    return Span(a.line, a.col, a.offset, b.end - a.offset)


# redundant declarations

def detect_redundant_decls(modules: Sequence[ShallowModule]) -> list[LintFinding]:
    out = []
    real = [m for m in modules if not m.is_fragment]
    for mod in real:
        if not mod.complete or mod.wildcard_connect:
            continue  # a truncated body cannot prove a name is unused
        port_names = {p.name for p in mod.ports}
        for d in mod.decls:
            if d.is_param or d.name in port_names or mod.refs[d.name]:
                continue
            out.append(_finding("redundant-decl", mod.file, d.token.span,
                                f"'{d.name}' is declared in module {mod.name} but never used",
                                (d.name,), "unused-decl"))
    seen: list[ShallowModule] = []
    for mod in real:
        sigs = {s.signature: s for s in mod.statements}
        for earlier in seen:
            shared = [s for sig, s in sigs.items() if sig in {t.signature for t in earlier.statements}]
            if len(shared) >= GROUP_MIN:
                shared.sort(key=lambda s: s.first.span.offset)
                names = [n for s in shared for n in s.names]
                out.append(_finding(
                    "redundant-decl", mod.file, _cover(shared[0].first, shared[-1].last),
                    f"module {mod.name} repeats {len(shared)} declaration lines of module "
                    f"{earlier.name}", names, "cross-module-copy"))
                break
        seen.append(mod)
    return out


# suffix chains

def _chain_depths(names: Iterable[str]) -> dict[str, tuple[int, Optional[str]]]:
    present = set(names)
    memo: dict[str, tuple[int, Optional[str]]] = {}

    def depth(name: str) -> tuple[int, Optional[str]]:
        if name in memo:
            return memo[name]
        cut = name.rfind("_")
        parent = name[:cut] if cut > 0 else None
        if parent and parent in present and cut < len(name) - 1:
            memo[name] = (depth(parent)[0] + 1, parent)
        else:
            memo[name] = (1, None)
        return memo[name]

    for n in present:
        depth(n)
    return memo


def detect_suffix_chains(modules: Sequence[ShallowModule]) -> list[LintFinding]:
    out = []
    for mod in modules:
        idents = [t for t in mod.tokens if t.kind is Kind.IDENTIFIER]
        depths = _chain_depths(t.text for t in idents)
        deepest = max((d for d, _ in depths.values()), default=0)
        if deepest < CHAIN_MIN:
            continue
        first_seen = {}
        for t in idents:
            first_seen.setdefault(t.text, t)
        leaf = min((n for n, (d, _) in depths.items() if d == deepest),
                   key=lambda n: first_seen[n].span.offset)
        chain = [leaf]
        while depths[chain[-1]][1] is not None:
            chain.append(depths[chain[-1]][1])
        chain.reverse()
        members = set(chain)
        toks = [t for t in idents if t.text in members]
        scope = "top-level code" if mod.is_fragment else f"module {mod.name}"
        out.append(_finding("suffix-chain", mod.file, _cover(toks[0], toks[-1]),
                            f"{len(chain)} identifiers in {scope} extend one another by "
                            f"_suffix, ending in '{leaf}'", chain))
    return out


# corrupt output

_BRACKETS = set("()[]{}")


def _symbol_runs(line_tokens: list[VToken]) -> list[list[VToken]]:
    """Maximal runs of byte-adjacent symbol tokens made of one repeated character."""
    runs, cur = [], []
    for t in line_tokens:
        ok = (t.kind in (Kind.OPERATOR, Kind.PUNCT, Kind.CORRUPT) and t.text
              and len(set(t.text)) == 1 and t.text[0] not in _BRACKETS)
        if ok and cur and cur[-1].span.end == t.span.offset and cur[-1].text[0] == t.text[0]:
            cur.append(t)
            continue
        if cur and sum(len(x.text) for x in cur) >= SYMBOL_RUN_MIN:
            runs.append(cur)
        cur = [t] if ok else []
    if cur and sum(len(x.text) for x in cur) >= SYMBOL_RUN_MIN:
        runs.append(cur)
    return runs


def _is_garbage(t: VToken) -> bool:
    if t.kind in (Kind.CORRUPT, Kind.OPERATOR):
        return True
    return t.kind is Kind.IDENTIFIER and set(t.text) == {"_"}


def detect_corrupt_regions(source: Source, file: str = "<input>") -> list[LintFinding]:
    stream = tokenize(source)
    by_line: dict[int, list[VToken]] = {}
    for t in stream.tokens:
        by_line.setdefault(t.span.line, []).append(t)
    out = []
    for line, toks in sorted(by_line.items()):
        runs = _symbol_runs(toks)
        in_run = {id(t) for r in runs for t in r}
        garbage = [t for t in toks if _is_garbage(t) or id(t) in in_run]
        if len(garbage) >= GARBAGE_MIN_TOKENS and len(garbage) / len(toks) > GARBAGE_FRACTION:
            out.append(_finding("corrupt-output", file, _cover(garbage[0], garbage[-1]),
                                f"line {line} is mostly garbage ({len(garbage)} of {len(toks)} tokens)",
                                [t.text for t in garbage], "garbage-line"))
            continue
        for t in toks:
            if t.kind is Kind.CORRUPT:
                out.append(_finding("corrupt-output", file, t.span,
                                    "unlexable or unterminated text", [t.text], "corrupt-token"))
        for r in runs:
            if any(t.kind is Kind.CORRUPT for t in r):
                continue
            out.append(_finding("corrupt-output", file, _cover(r[0], r[-1]),
                                f"run of repeated '{r[0].text[0]}' symbols",
                                ["".join(t.text for t in r)], "symbol-run"))
    return out


# range and width checks

def _literal_select(tokens: list[VToken], k: int) -> Optional[tuple[int, Optional[int], int]]:
    """(msb, lsb or None, index of ']') for ``[N]`` or ``[N:M]`` at ``k``."""
    end = _match(tokens, k)
    inner = tokens[k + 1:end]
    nums = [t for t in inner if t.kind is Kind.NUMBER]
    if len(inner) == 1 and nums and inner[0].text.isdigit():
        return int(inner[0].text), None, end
    if len(inner) == 3 and inner[1].text == ":" and all(t.text.isdigit() for t in (inner[0], inner[2])):
        return int(inner[0].text), int(inner[2].text), end
    return None


_ASSIGN_PREV = {";", "begin", "else", ")", ":", "assign", "end"}


def detect_range_violations(modules: Sequence[ShallowModule]) -> list[LintFinding]:
    out = []
    for mod in modules:
        if mod.is_fragment:
            continue
        ranges = mod.literal_ranges()
        body = mod.body
        for k, t in enumerate(body):
            if t.kind is not Kind.IDENTIFIER or t.text not in ranges:
                continue
            if k + 1 >= len(body) or body[k + 1].text != "[":
                continue
            prev = body[k - 1].text if k else ";"
            if prev in ("logic", "reg", "wire", ",") and _declares(body, k):
                continue
            sel = _literal_select(body, k + 1)
            if sel is None:
                continue
            msb, lsb, end = sel
            rng = ranges[t.text]
            bad = [b for b in (msb, lsb) if b is not None and not rng.contains(b)]
            if bad:
                text = "".join(x.text for x in body[k:end + 1])
                out.append(_finding("size-mismatch", mod.file, _cover(t, body[end]),
                                    f"select {text} is outside the declared range {rng.text} "
                                    f"of '{t.text}'", [text], "range-overflow"))
            # dest = src[msb:lsb];
            if (lsb is not None and k >= 2 and body[k - 1].text in ("=", "<=")
                    and body[k - 2].kind is Kind.IDENTIFIER and end + 1 < len(body)
                    and body[end + 1].text == ";"):
                dest = body[k - 2]
                before = body[k - 3].text if k >= 3 else ";"
                if dest.text in ranges and before in _ASSIGN_PREV:
                    want, got = ranges[dest.text].width, abs(msb - lsb) + 1
                    if want != got:
                        out.append(_finding(
                            "size-mismatch", mod.file, _cover(dest, body[end + 1]),
                            f"{got}-bit slice assigned to {want}-bit '{dest.text}'",
                            [dest.text, "".join(x.text for x in body[k:end + 1])], "width-mismatch"))
    return out


def _declares(body: list[VToken], k: int) -> bool:
    """True when ``body[k]`` is the name in a declaration (its ``[`` is an unpacked dim)."""
    j = k - 1
    while j >= 0 and body[j].text not in (";",):
        if body[j].kind is Kind.KEYWORD and body[j].text in ("logic", "reg", "wire", "input", "output", "inout"):
            return True
        j -= 1
    return False


# unused ports

def detect_unused_ports(modules: Sequence[ShallowModule]) -> list[LintFinding]:
    out = []
    for mod in modules:
        if mod.is_fragment or not mod.complete or mod.wildcard_connect:
            continue
        for p in mod.ports:
            if mod.refs[p.name] == 0:
                out.append(_finding("unused-port", mod.file, p.token.span,
                                    f"port '{p.name}' of module {mod.name} is never used",
                                    (p.name,)))
    return out


# repeated specification prose

_WORD = re.compile(r"[A-Za-z][A-Za-z'-]*[.,;:!?]?$")
_CODE_END = (";", ",", "(", ")", "{", "}", "begin")


def _normalize(line: str) -> str:
    return " ".join(line.lower().split())


def _is_prose(line: str) -> bool:
    words = line.split()
    if len(words) < 3:
        return False
    if line.rstrip().endswith(_CODE_END):
        return False
    plain = sum(1 for w in words if _WORD.match(w))
    return plain / len(words) >= 0.6


def detect_repetition(text: Union[str, bytes], file: str = "<input>") -> list[LintFinding]:
    if isinstance(text, bytes):
        text = text.decode("utf-8", "surrogateescape")
    lines = text.split("\n")
    offsets, pos = [], 0
    for ln in lines:
        offsets.append(pos)
        pos += len(ln.encode("utf-8", "surrogateescape")) + 1
    norm = [_normalize(ln) for ln in lines]
    out = []
    i = 0
    while i < len(lines):
        if not _is_prose(lines[i]):
            i += 1
            continue
        block = [i]
        j = i + 1
        while j < len(lines) and _is_prose(lines[j]) and all(
                difflib.SequenceMatcher(None, norm[b], norm[j], autojunk=False).ratio() > REPEAT_SIMILARITY
                for b in block):
            block.append(j)
            j += 1
        if len(block) >= REPEAT_MIN_LINES:
            first, last = block[0], block[-1]
            end = offsets[last] + len(lines[last].encode("utf-8", "surrogateescape"))
            span = Span(first + 1, 1, offsets[first], end - offsets[first])
            out.append(_finding("spec-repetition", file, span,
                                f"{len(block)} consecutive near-identical lines",
                                [lines[b].strip() for b in block]))
            i = j
        else:
            i += 1
    return out


# driver

def _as_sources(sources) -> list[tuple[str, Source]]:
    if isinstance(sources, (str, bytes)):
        return [("<input>", sources)]
    if isinstance(sources, Mapping):
        return list(sources.items())
    return list(sources)


def lint_files(sources) -> list[LintFinding]:
    """Lint one or more sources together.

    ``sources`` is a single text, a mapping of file name to text, or a list
    of (name, text) pairs. Cross-module checks see every module of every
    file. Findings come back sorted by (file, offset).
    """
    pairs = _as_sources(sources)
    parsed: list[ParsedFile] = [parse_source(src, name) for name, src in pairs]
    modules = [m for p in parsed for m in p.modules]
    findings = detect_redundant_decls(modules) + detect_unused_ports(modules) \
        + detect_range_violations(modules)
    for (name, src), p in zip(pairs, parsed):
        findings += detect_suffix_chains(p.scopes)
        findings += detect_corrupt_regions(p.stream.source, name)
        findings += detect_repetition(p.stream.source, name)
    return sorted(findings, key=LintFinding.sort_key)


def lint_source(source: Source, file: str = "<input>") -> list[LintFinding]:
    return lint_files([(file, source)])


def rule_counts(findings: Iterable[LintFinding]) -> dict[str, int]:
    counts = Counter(f.rule for f in findings)
    return {rule: counts.get(rule, 0) for rule in RULES}


def findings_to_json(findings: Sequence[LintFinding]) -> str:
    return json.dumps({"format_version": 1, "thresholds": THRESHOLDS,
                       "findings": [f.to_dict() for f in findings]}, indent=2)


def findings_to_text(findings: Sequence[LintFinding]) -> str:
    return "".join(f.to_text() + "\n" for f in findings)
