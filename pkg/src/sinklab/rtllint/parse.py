"""Shallow structural parse of Verilog token streams.

Extracts module boundaries, port lists (ANSI and non-ANSI), body
declarations, and identifier reference counts. No expression grammar.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from ..vlex import Kind, Source, Span, VToken, VTokenStream, tokenize

DIRECTIONS = frozenset({"input", "output", "inout", "ref"})
DECL_START = frozenset("""
logic reg wire bit byte shortint int longint integer time real realtime shortreal
tri tri0 tri1 triand trior wand wor uwire supply0 supply1 var genvar string
input output inout parameter localparam signed unsigned
""".split())
PARAM_KEYWORDS = frozenset({"parameter", "localparam", "genvar"})
STATEMENT_BOUNDARY = frozenset({";", "begin", "end", "generate", "endgenerate",
                                "endfunction", "endtask", "endcase"})
OPENERS = {"(": ")", "[": "]", "{": "}"}


@dataclass(frozen=True)
class Range:
    text: str
    msb: Optional[int] = None
    lsb: Optional[int] = None

    @property
    def literal(self) -> bool:
        return self.msb is not None and self.lsb is not None

    @property
    def width(self) -> Optional[int]:
        if not self.literal:
            return None
        return abs(self.msb - self.lsb) + 1

    def contains(self, index: int) -> bool:
        return min(self.msb, self.lsb) <= index <= max(self.msb, self.lsb)


@dataclass
class Port:
    name: str
    direction: Optional[str]
    range: Optional[Range]
    token: VToken


@dataclass
class Decl:
    name: str
    range: Optional[Range]
    token: VToken
    is_param: bool = False
    unpacked: bool = False


@dataclass
class DeclStatement:
    """One declaration statement, e.g. ``logic [W-1:0] a, b;``."""

    keyword: str
    range: Optional[Range]
    names: tuple[str, ...]
    first: VToken
    last: VToken

    @property
    def signature(self) -> tuple:
        return (self.range.text if self.range else "", self.names)


@dataclass
class ShallowModule:
    name: str
    file: str
    ports: list[Port] = field(default_factory=list)
    decls: list[Decl] = field(default_factory=list)
    statements: list[DeclStatement] = field(default_factory=list)
    refs: Counter = field(default_factory=Counter)
    tokens: list[VToken] = field(default_factory=list)
    body: list[VToken] = field(default_factory=list)
    complete: bool = False
    wildcard_connect: bool = False
    is_fragment: bool = False

    def port(self, name: str) -> Optional[Port]:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    def literal_ranges(self) -> dict[str, Range]:
        """Declared literal packed ranges of ports and plain declarations."""
        out: dict[str, Range] = {}
        for p in self.ports:
            if p.range is not None and p.range.literal:
                out[p.name] = p.range
        for d in self.decls:
            if d.range is not None and d.range.literal and not d.unpacked:
                out[d.name] = d.range
            elif d.name in out:
                del out[d.name]
        return out

    @property
    def span(self) -> Span:
        first, last = self.tokens[0].span, self.tokens[-1].span
        return Span(first.line, first.col, first.offset, last.end - first.offset)


@dataclass
class ParsedFile:
    file: str
    stream: VTokenStream
    modules: list[ShallowModule]
    fragment: Optional[ShallowModule]

    @property
    def scopes(self) -> list[ShallowModule]:
        return self.modules + ([self.fragment] if self.fragment else [])


def _match(tokens: list[VToken], k: int) -> int:
    """Index of the bracket closing the one at ``k`` (or len(tokens))."""
    want = [OPENERS[tokens[k].text]]
    j = k + 1
    while j < len(tokens) and want:
        t = tokens[j].text
        if t in OPENERS and tokens[j].kind is Kind.PUNCT:
            want.append(OPENERS[t])
        elif want and t == want[-1] and tokens[j].kind is Kind.PUNCT:
            want.pop()
        j += 1
    return j - 1 if not want else len(tokens)


def _split_commas(tokens: list[VToken]) -> list[list[VToken]]:
    parts, cur, depth = [], [], 0
    for t in tokens:
        if t.kind is Kind.PUNCT and t.text in "([{":
            depth += 1
        elif t.kind is Kind.PUNCT and t.text in ")]}":
            depth -= 1
        if depth == 0 and t.text == "," and t.kind is Kind.PUNCT:
            parts.append(cur)
            cur = []
        else:
            cur.append(t)
    parts.append(cur)
    return [p for p in parts if p]


def _int(tok: VToken) -> Optional[int]:
    if tok.kind is Kind.NUMBER and tok.text.replace("_", "").isdigit():
        return int(tok.text.replace("_", ""))
    return None


def parse_range(inner: list[VToken]) -> Range:
    text = "[" + "".join(t.text for t in inner) + "]"
    if len(inner) == 3 and inner[1].text == ":":
        msb, lsb = _int(inner[0]), _int(inner[2])
        if msb is not None and lsb is not None:
            return Range(text, msb, lsb)
    return Range(text)


def _module_starts(tokens: list[VToken]) -> list[int]:
    starts = []
    for i, t in enumerate(tokens):
        if t.kind is Kind.KEYWORD and t.text in ("module", "macromodule") and i + 2 < len(tokens) \
                and tokens[i + 1].kind is Kind.IDENTIFIER and tokens[i + 2].text in ("#", "(", ";"):
            starts.append(i)
        elif t.kind is Kind.KEYWORD and t.text in ("module", "macromodule") and i + 2 == len(tokens) \
                and tokens[i + 1].kind is Kind.IDENTIFIER:
            starts.append(i)
    return starts


def _parse_port_item(item: list[VToken], direction: Optional[str]) -> tuple[Optional[Port], Optional[str]]:
    if item and item[0].text in DIRECTIONS:
        direction = item[0].text
    rng = None
    name_tok = None
    k = 0
    while k < len(item):
        t = item[k]
        if t.text == "=":
            break
        if t.kind is Kind.PUNCT and t.text in OPENERS:
            end = _match(item, k)
            if t.text == "[" and rng is None and name_tok is None:
                rng = parse_range(item[k + 1:end])
            k = end + 1
            continue
        if t.kind is Kind.IDENTIFIER:
            name_tok = t
        k += 1
    if name_tok is None:
        return None, direction
    return Port(name_tok.text, direction, rng, name_tok), direction


def _parse_decl(stmt: list[VToken]) -> tuple[DeclStatement, list[Decl], set[int], list[VToken]]:
    """Parse one declaration statement (without its ';').

    Returns the statement, its declared names, the ids of name tokens, and
    tokens that are references (ranges, initializers).
    """
    keyword = stmt[0].text
    k = 0
    rng = None
    refs: list[VToken] = []
    while k < len(stmt):
        t = stmt[k]
        if t.kind is Kind.KEYWORD:
            k += 1
        elif t.kind is Kind.PUNCT and t.text == "[":
            end = _match(stmt, k)
            inner = stmt[k + 1:end]
            if rng is None:
                rng = parse_range(inner)
            refs.extend(inner)
            k = end + 1
        elif t.kind is Kind.PUNCT and t.text == "#":
            k += 1
        else:
            break
    decls: list[Decl] = []
    name_ids: set[int] = set()
    for part in _split_commas(stmt[k:]):
        if part[0].kind is not Kind.IDENTIFIER:
            refs.extend(part)
            continue
        name = part[0]
        unpacked = False
        j = 1
        while j < len(part) and part[j].text == "[":
            end = _match(part, j)
            refs.extend(part[j + 1:end])
            unpacked = True
            j = end + 1
        refs.extend(part[j:])
        name_ids.add(id(name))
        decls.append(Decl(name.text, rng, name, keyword in PARAM_KEYWORDS, unpacked))
    statement = DeclStatement(keyword, rng, tuple(d.name for d in decls), stmt[0], stmt[-1])
    return statement, decls, name_ids, refs


def _parse_module(tokens: list[VToken], file: str) -> ShallowModule:
    mod = ShallowModule(name=tokens[1].text, file=file, tokens=tokens)
    mod.complete = tokens[-1].kind is Kind.KEYWORD and tokens[-1].text == "endmodule"
    k = 2
    if k < len(tokens) and tokens[k].text == "#":
        k += 1
        if k < len(tokens) and tokens[k].text == "(":
            k = _match(tokens, k) + 1
    if k < len(tokens) and tokens[k].text == "(":
        end = _match(tokens, k)
        direction = None
        for item in _split_commas(tokens[k + 1:end]):
            port, direction = _parse_port_item(item, direction)
            if port is not None:
                mod.ports.append(port)
        k = end + 1
    while k < len(tokens) and tokens[k].text != ";":
        k += 1
    stop = len(tokens) - 1 if mod.complete else len(tokens)
    mod.body = tokens[k + 1:stop]
    _parse_body(mod)
    return mod


def _parse_body(mod: ShallowModule) -> None:
    body = mod.body
    declared: set[int] = set()
    depth = 0
    nested = 0  # inside function/task
    k = 0
    while k < len(body):
        t = body[k]
        if t.kind is Kind.PUNCT and t.text in "([{":
            depth += 1
        elif t.kind is Kind.PUNCT and t.text in ")]}":
            depth = max(0, depth - 1)
        elif t.kind is Kind.KEYWORD and t.text in ("function", "task"):
            nested += 1
        elif t.kind is Kind.KEYWORD and t.text in ("endfunction", "endtask"):
            nested = max(0, nested - 1)
        elif (t.kind is Kind.KEYWORD and t.text in DECL_START and depth == 0 and not nested
              and _at_statement_start(body, k)):
            end = k
            while end < len(body) and body[end].text != ";":
                end += 1
            stmt = body[k:end]
            statement, decls, name_ids, _ = _parse_decl(stmt)
            declared |= name_ids
            if statement.keyword in DIRECTIONS:
                for d in decls:
                    _merge_port(mod, d, statement.keyword)
            else:
                mod.decls.extend(decls)
                if not any(d.is_param for d in decls) and decls:
                    mod.statements.append(statement)
            # leave reference counting to the sweep below
            k = end + 1
            continue
        k += 1

    for i, t in enumerate(body):
        if t.kind is Kind.PUNCT and t.text == "." and i + 1 < len(body) and body[i + 1].text == "*":
            mod.wildcard_connect = True
        if t.kind is not Kind.IDENTIFIER or id(t) in declared:
            continue
        prev = body[i - 1] if i else None
        nxt = body[i + 1] if i + 1 < len(body) else None
        if prev is not None and prev.text == "." and prev.kind is Kind.PUNCT \
                and nxt is not None and nxt.text == "(":
            continue  # formal port name of a named connection
        mod.refs[t.text] += 1


def _at_statement_start(body: list[VToken], k: int) -> bool:
    if k == 0:
        return True
    prev = body[k - 1]
    if prev.text in STATEMENT_BOUNDARY:
        return True
    # labelled block: begin : name
    return (prev.kind is Kind.IDENTIFIER and k >= 3 and body[k - 2].text == ":"
            and body[k - 3].text == "begin")


def _merge_port(mod: ShallowModule, decl: Decl, direction: str) -> None:
    port = mod.port(decl.name)
    if port is None:
        mod.ports.append(Port(decl.name, direction, decl.range, decl.token))
    else:
        port.direction = direction
        if decl.range is not None:
            port.range = decl.range


def parse_source(source: Source, file: str = "<input>") -> ParsedFile:
    stream = tokenize(source)
    tokens = stream.tokens
    starts = _module_starts(tokens)
    modules = []
    outside: list[VToken] = []
    cursor = 0
    for n, start in enumerate(starts):
        outside.extend(tokens[cursor:start])
        limit = starts[n + 1] if n + 1 < len(starts) else len(tokens)
        stop = limit
        for j in range(start, limit):
            if tokens[j].kind is Kind.KEYWORD and tokens[j].text == "endmodule":
                stop = j + 1
                break
        modules.append(_parse_module(tokens[start:stop], file))
        cursor = stop
    outside.extend(tokens[cursor:])
    fragment = None
    if outside:
        fragment = ShallowModule(name="$unit", file=file, tokens=outside, body=outside,
                                 is_fragment=True)
        _parse_body(fragment)
    return ParsedFile(file, stream, modules, fragment)
