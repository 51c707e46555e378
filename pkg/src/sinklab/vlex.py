"""Verilog/SystemVerilog lexer.

The lexer is total: every byte of the input lands in exactly one token span
or one skipped span (whitespace, comment). Bytes no rule accepts are
coalesced into one ``Corrupt`` token per contiguous run.

Token counts reported anywhere in this package are lengths of
:func:`tokenize` output.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Union

Source = Union[str, bytes]


class Kind(str, enum.Enum):
    KEYWORD = "Keyword"
    IDENTIFIER = "Identifier"
    NUMBER = "Number"
    BASED_LITERAL = "BasedLiteral"
    OPERATOR = "Operator"
    PUNCT = "Punct"
    STRING = "String"
    CORRUPT = "Corrupt"

    def __str__(self) -> str:
        return self.value


# IEEE 1800-2017 Annex B reserved keywords
KEYWORDS = frozenset("""
accept_on alias always always_comb always_ff always_latch and assert assign
assume automatic before begin bind bins binsof bit break buf bufif0 bufif1 byte
case casex casez cell chandle checker class clocking cmos config const
constraint context continue cover covergroup coverpoint cross deassign default
defparam design disable dist do edge else end endcase endchecker endclass
endclocking endconfig endfunction endgenerate endgroup endinterface endmodule
endpackage endprimitive endprogram endproperty endspecify endsequence endtable
endtask enum event eventually expect export extends extern final first_match
for force foreach forever fork forkjoin function generate genvar global highz0
highz1 if iff ifnone ignore_bins illegal_bins implements implies import incdir
include initial inout input inside instance int integer interconnect interface
intersect join join_any join_none large let liblist library local localparam
logic longint macromodule matches medium modport module nand negedge nettype
new nexttime nmos nor noshowcancelled not notif0 notif1 null or output package
packed parameter pmos posedge primitive priority program property protected
pull0 pull1 pulldown pullup pulsestyle_ondetect pulsestyle_onevent pure rand
randc randcase randsequence rcmos real realtime ref reg reject_on release
repeat restrict return rnmos rpmos rtran rtranif0 rtranif1 s_always
s_eventually s_nexttime s_until s_until_with scalared sequence shortint
shortreal showcancelled signed small soft solve specify specparam static
string strong strong0 strong1 struct super supply0 supply1 sync_accept_on
sync_reject_on table tagged task this throughout time timeprecision timeunit
tran tranif0 tranif1 tri tri0 tri1 triand trior trireg type typedef union
unique unique0 unsigned until until_with untyped use uwire var vectored virtual
void wait wait_order wand weak weak0 weak1 while wildcard wire with within wor
xnor xor
""".split())

OPERATORS = sorted("""
<<<= >>>= <<= >>= === !== ==? !=? <-> |-> |=> ->> <<< >>>
== != <= >= && || << >> ** -> += -= *= /= %= &= |= ^= ++ -- ~& ~| ~^ ^~ :: +: -:
:= :/ ## '{
+ - * / % & | ^ ~ ! < > = ? : ' $
""".split(), key=len, reverse=True)
PUNCTUATION = "()[]{};,.#@"

_RULES = [
    ("ws", rb"[ \t\r\n\f\v]+"),
    ("comment", rb"//[^\n]*|/\*.*?\*/"),
    ("unterminated", rb"/\*.*"),
    ("string", rb'"(?:[^"\\\n]|\\.)*"'),
    ("unterminated", rb'"(?:[^"\\\n]|\\.)*'),
    ("based", rb"(?:[0-9][0-9_]*)?'[sS]?[bBoOdDhH][0-9a-fA-FxXzZ?_]+"),
    ("based", rb"'[01xXzZ](?![0-9A-Za-z_$])"),
    ("number", rb"[0-9][0-9_]*(?:\.[0-9][0-9_]*)?(?:[eE][+-]?[0-9][0-9_]*)?"
               rb"(?:fs|ps|ns|us|ms|s)?(?![A-Za-z_$0-9])"),
    ("ident", rb"[A-Za-z_][A-Za-z0-9_$]*"),
    ("sysident", rb"\$[A-Za-z0-9_$]+"),
    ("sysident", rb"`[A-Za-z_][A-Za-z0-9_$]*"),
    ("sysident", rb"\\[!-~]+"),
    ("op", b"|".join(re.escape(op.encode()) for op in OPERATORS)),
    ("punct", rb"[" + re.escape(PUNCTUATION.encode()) + rb"]"),
]
_MASTER = re.compile(b"|".join(b"(?P<%s%d>%s)" % (name.encode(), i, pat)
                               for i, (name, pat) in enumerate(_RULES)), re.DOTALL)

_KIND_OF_RULE = {
    "string": Kind.STRING,
    "unterminated": Kind.CORRUPT,
    "based": Kind.BASED_LITERAL,
    "number": Kind.NUMBER,
    "sysident": Kind.IDENTIFIER,
    "op": Kind.OPERATOR,
    "punct": Kind.PUNCT,
}


class Span(NamedTuple):
    line: int
    col: int
    offset: int
    length: int

    @property
    def end(self) -> int:
        return self.offset + self.length


@dataclass(frozen=True)
class VToken:
    kind: Kind
    text: str
    span: Span

    @property
    def key(self) -> tuple[str, str]:
        """Identity used for scoring: (kind, lexeme)."""
        return (self.kind.value, self.text)

    @property
    def line(self) -> int:
        return self.span.line

    def __repr__(self) -> str:
        return f"VToken({self.kind.value}, {self.text!r}, {self.span.line}:{self.span.col})"


@dataclass(frozen=True)
class Skipped:
    kind: str  # "whitespace" or "comment"
    span: Span


class VTokenStream:
    """Tokens of one source plus the skipped spans between them."""

    def __init__(self, source: bytes, tokens: list[VToken], skipped: list[Skipped]):
        self.source = source
        self.tokens = tokens
        self.skipped = skipped

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[VToken]:
        return iter(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]

    def keys(self) -> list[tuple[str, str]]:
        return [t.key for t in self.tokens]

    def lexemes(self) -> list[str]:
        return [t.text for t in self.tokens]

    def segments(self) -> list[Union[VToken, Skipped]]:
        return sorted([*self.tokens, *self.skipped], key=lambda s: s.span.offset)

    def reconstruct(self) -> bytes:
        out = []
        for seg in self.segments():
            if isinstance(seg, VToken):
                out.append(seg.text.encode("utf-8", "surrogateescape"))
            else:
                out.append(self.source[seg.span.offset:seg.span.end])
        return b"".join(out)

    def to_text(self) -> str:
        return "".join(f"{t.kind.value}\t{_escape(t.text)}\t{t.span.line}:{t.span.col}\n"
                       for t in self.tokens)

    def to_json(self) -> str:
        return json.dumps([{"kind": t.kind.value, "text": t.text, "line": t.span.line,
                            "col": t.span.col, "offset": t.span.offset,
                            "length": t.span.length} for t in self.tokens])


def _escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


def _to_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    return source.encode("utf-8", "surrogateescape")


def tokenize(source: Source) -> VTokenStream:
    """Lex ``source`` by maximal munch. Never raises on malformed input."""
    data = _to_bytes(source)
    tokens: list[VToken] = []
    skipped: list[Skipped] = []
    line, line_start = 1, 0
    pos, n = 0, len(data)
    corrupt_start = -1

    def span(start: int, end: int) -> Span:
        return Span(line, start - line_start + 1, start, end - start)

    def flush_corrupt(end: int) -> None:
        nonlocal corrupt_start
        if corrupt_start >= 0:
            text = data[corrupt_start:end].decode("utf-8", "surrogateescape")
            tokens.append(VToken(Kind.CORRUPT, text, span(corrupt_start, end)))
            corrupt_start = -1

    while pos < n:
        m = _MASTER.match(data, pos)
        if m is None or m.end() == pos:
            if corrupt_start < 0:
                corrupt_start = pos
            pos += 1
            continue
        flush_corrupt(pos)
        rule = m.lastgroup.rstrip("0123456789")
        end = m.end()
        if rule in ("ws", "comment"):
            skipped.append(Skipped("whitespace" if rule == "ws" else "comment", span(pos, end)))
        else:
            text = data[pos:end].decode("utf-8", "surrogateescape")
            if rule == "ident":
                kind = Kind.KEYWORD if text in KEYWORDS else Kind.IDENTIFIER
            else:
                kind = _KIND_OF_RULE[rule]
            tokens.append(VToken(kind, text, span(pos, end)))
        newlines = data.count(b"\n", pos, end)
        if newlines:
            line += newlines
            line_start = data.rindex(b"\n", pos, end) + 1
        pos = end
    flush_corrupt(pos)
    return VTokenStream(data, tokens, skipped)


def token_count(source: Source) -> int:
    return len(tokenize(source))
