"""Single-shot RTL prompt assembly from a structured design description.

Rendered layout::

    <header>

    module: <name>
    ports:
     <port line>
    explanation: <text>
    notes:
     - <note>

    guidelines:
     - <line>

Modules are separated by one blank line; ``ports``, ``notes`` and the
guidelines block appear only when non-empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .vlex import Kind, tokenize

DIRECTION_WORDS = ("input", "output", "inout")
RESERVED_PREFIXES = ("module:", "ports:", "explanation:", "notes:", "guidelines:")


class SpecError(ValueError):
    """Raised when a design spec cannot be loaded or does not validate."""

    def __init__(self, errors: list["SpecIssue"]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))


@dataclass(frozen=True)
class SpecIssue:
    code: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


@dataclass
class ModuleSpec:
    name: str
    explanation: str
    ports: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


@dataclass
class DesignSpec:
    header: str
    modules: list[ModuleSpec] = field(default_factory=list)
    global_guidelines: list[str] = field(default_factory=list)

    @classmethod
    def from_dict(cls, data: dict) -> "DesignSpec":
        if not isinstance(data, dict):
            raise SpecError([SpecIssue("schema", "spec", "top level must be a JSON object")])
        issues = []
        if not isinstance(data.get("header"), str):
            issues.append(SpecIssue("schema", "header", "missing or not a string"))
        mods = data.get("modules", [])
        if not isinstance(mods, list):
            issues.append(SpecIssue("schema", "modules", "must be a list"))
            mods = []
        modules = []
        for i, m in enumerate(mods):
            where = f"modules[{i}]"
            if not isinstance(m, dict) or not isinstance(m.get("name"), str):
                issues.append(SpecIssue("schema", where, "needs a string 'name'"))
                continue
            for key in ("ports", "notes"):
                val = m.get(key, [])
                if not (isinstance(val, list) and all(isinstance(v, str) for v in val)):
                    issues.append(SpecIssue("schema", f"{where}.{key}", "must be a list of strings"))
            if not isinstance(m.get("explanation", ""), str):
                issues.append(SpecIssue("schema", f"{where}.explanation", "must be a string"))
            modules.append(ModuleSpec(m["name"], m.get("explanation", "") if isinstance(
                m.get("explanation", ""), str) else "", list(m.get("ports") or []),
                list(m.get("notes") or [])))
        guide = data.get("global_guidelines", [])
        if not (isinstance(guide, list) and all(isinstance(g, str) for g in guide)):
            issues.append(SpecIssue("schema", "global_guidelines", "must be a list of strings"))
            guide = []
        if issues:
            raise SpecError(issues)
        return cls(data["header"], modules, list(guide))

    def to_dict(self) -> dict:
        return {
            "header": self.header,
            "modules": [{"name": m.name, "explanation": m.explanation, "ports": m.ports,
                         "notes": m.notes} for m in self.modules],
            "global_guidelines": self.global_guidelines,
        }


def load_spec(path: Union[str, Path]) -> DesignSpec:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError([SpecIssue("json", str(path), f"{exc.msg} at byte {exc.pos}")]) from None
    return DesignSpec.from_dict(data)


def port_line_error(line: str) -> str | None:
    """Why ``line`` is not a single port declaration, or None if it is."""
    toks = tokenize(line).tokens
    if not toks:
        return "empty port line"
    if any(t.kind is Kind.CORRUPT for t in toks):
        return "contains unlexable text"
    stack = []
    pairs = {")": "(", "]": "[", "}": "{"}
    for t in toks:
        if t.text in "([{" and t.kind is Kind.PUNCT:
            stack.append(t.text)
        elif t.text in pairs and t.kind is Kind.PUNCT:
            if not stack or stack.pop() != pairs[t.text]:
                return f"unbalanced '{t.text}'"
    if stack:
        return f"unclosed '{stack[-1]}'"
    if toks[0].text not in DIRECTION_WORDS:
        return "must start with input, output or inout"
    body = toks[:-1] if toks[-1].text == "," else toks
    depth = 0
    for t in body:
        if t.kind is Kind.PUNCT and t.text in "([{":
            depth += 1
        elif t.kind is Kind.PUNCT and t.text in ")]}":
            depth -= 1
        elif depth == 0 and t.text == ",":
            return "declares more than one port"
    if len(body) < 2 or body[-1].kind is not Kind.IDENTIFIER:
        return "must end with the port name"
    return None


def _has_blank_or_reserved(text: str) -> str | None:
    for ln in text.split("\n"):
        if not ln.strip() and "\n" in text:
            return "contains a blank line"
        if ln.strip().lower().startswith(RESERVED_PREFIXES):
            return f"line starts with a reserved key: {ln.strip()!r}"
    return None


def validate_spec(spec: DesignSpec) -> list[SpecIssue]:
    """All problems found in ``spec``; an empty list means it renders."""
    issues: list[SpecIssue] = []
    if not spec.header.strip():
        issues.append(SpecIssue("empty", "header", "header is empty"))
    elif (why := _has_blank_or_reserved(spec.header)):
        issues.append(SpecIssue("format", "header", why))
    seen: set[str] = set()
    for i, m in enumerate(spec.modules):
        where = f"module {m.name!r}" if m.name else f"modules[{i}]"
        if m.name in seen:
            issues.append(SpecIssue("duplicate-name", where, f"duplicate module name {m.name!r}"))
        seen.add(m.name)
        names = tokenize(m.name).tokens
        if len(names) != 1 or names[0].kind is not Kind.IDENTIFIER:
            issues.append(SpecIssue("name", where, f"{m.name!r} is not a Verilog identifier"))
        if not m.explanation.strip():
            issues.append(SpecIssue("empty", where, "explanation is empty"))
        elif (why := _has_blank_or_reserved(m.explanation)):
            issues.append(SpecIssue("format", where, f"explanation {why}"))
        for line in m.ports:
            if "\n" in line:
                issues.append(SpecIssue("port", where, f"port line spans several lines: {line!r}"))
            elif (why := port_line_error(line)):
                issues.append(SpecIssue("port", where, f"bad port line {line!r}: {why}"))
        for note in m.notes:
            if "\n" in note or not note.strip():
                issues.append(SpecIssue("format", where, f"note must be one nonblank line: {note!r}"))
    for g in spec.global_guidelines:
        if "\n" in g or not g.strip():
            issues.append(SpecIssue("format", "global_guidelines", f"guideline must be one nonblank line: {g!r}"))
    return issues


def render_prompt(spec: DesignSpec) -> str:
    """Deterministic prompt text for ``spec``. Raises :class:`SpecError` if it does not validate."""
    issues = validate_spec(spec)
    if issues:
        raise SpecError(issues)
    blocks = [spec.header.rstrip("\n")]
    for m in spec.modules:
        lines = [f"module: {m.name}"]
        if m.ports:
            lines.append("ports:")
            lines.extend(" " + p.strip() for p in m.ports)
        lines.append(f"explanation: {m.explanation.strip()}")
        if m.notes:
            lines.append("notes:")
            lines.extend(f" - {n.strip()}" for n in m.notes)
        blocks.append("\n".join(lines))
    if spec.global_guidelines:
        blocks.append("\n".join(["guidelines:", *(f" - {g.strip()}" for g in spec.global_guidelines)]))
    return "\n\n".join(blocks) + "\n"
