import json

import pytest
from hypothesis import given, strategies as st

from sinklab.resources import data_dir
from sinklab.vlex import Kind, token_count, tokenize


def lex(src):
    return [t.text for t in tokenize(src)]


def test_examples():
    assert lex("assign dest = inst[111:10];") == \
        ["assign", "dest", "=", "inst", "[", "111", ":", "10", "]", ";"]
    assert lex("logic [WIDTH-1:0] a, b;") == \
        ["logic", "[", "WIDTH", "-", "1", ":", "0", "]", "a", ",", "b", ";"]
    assert lex("") == []
    assert token_count("") == 0
    assert token_count("module m; endmodule") == 4


@pytest.mark.parametrize("src,kind", [
    ("16'h00FF", Kind.BASED_LITERAL),
    ("'0", Kind.BASED_LITERAL),
    ("4'sb1010", Kind.BASED_LITERAL),
    ("'hff", Kind.BASED_LITERAL),
    ("1.5e3", Kind.NUMBER),
    ("10ns", Kind.NUMBER),
    ("1_000", Kind.NUMBER),
    ("$clog2", Kind.IDENTIFIER),
    ("`define", Kind.IDENTIFIER),
    ("\\bus+index", Kind.IDENTIFIER),
    ('"a \\" b"', Kind.STRING),
    ("always_ff", Kind.KEYWORD),
    ("<<<=", Kind.OPERATOR),
    ("::", Kind.OPERATOR),
    ("'{", Kind.OPERATOR),
])
def test_single_token_kinds(src, kind):
    toks = tokenize(src).tokens
    assert len(toks) == 1 and toks[0].kind is kind and toks[0].text == src


def test_maximal_munch_operators():
    assert lex("a<=b") == ["a", "<=", "b"]
    assert lex("a<<<=b") == ["a", "<<<=", "b"]
    assert lex("a===b") == ["a", "===", "b"]
    assert lex("x+:4") == ["x", "+:", "4"]


def test_comments_and_whitespace_skipped():
    src = "a /* block\n comment */ b // line\n c"
    stream = tokenize(src)
    assert stream.lexemes() == ["a", "b", "c"]
    assert [s.kind for s in stream.skipped].count("comment") == 2


def test_corrupt_runs_coalesce():
    stream = tokenize(b"a \xff\xfe\x80 b")
    kinds = [t.kind for t in stream]
    assert kinds == [Kind.IDENTIFIER, Kind.CORRUPT, Kind.IDENTIFIER]
    assert stream.reconstruct() == b"a \xff\xfe\x80 b"


def test_unterminated_comment_and_string_are_corrupt():
    assert [t.kind for t in tokenize("a /* never closed")] == [Kind.IDENTIFIER, Kind.CORRUPT]
    assert [t.kind for t in tokenize('x = "open\ny')] == \
        [Kind.IDENTIFIER, Kind.OPERATOR, Kind.CORRUPT, Kind.IDENTIFIER]


def test_spans_are_line_and_byte_column():
    toks = tokenize("module m;\n  wire é_x;").tokens
    assert (toks[3].span.line, toks[3].span.col) == (2, 3)
    assert toks[0].span.offset == 0 and toks[1].span.offset == 7


def test_eleven_vs_one_hundred_eleven_differ_in_one_token():
    a, b = tokenize("inst[11:10]").keys(), tokenize("inst[111:10]").keys()
    assert len(a) == len(b) and sum(x != y for x, y in zip(a, b)) == 1


def test_json_and_text_output():
    stream = tokenize("a\t<= 1;")
    rows = json.loads(stream.to_json())
    assert rows[1] == {"kind": "Operator", "text": "<=", "line": 1, "col": 3, "offset": 2, "length": 2}
    assert stream.to_text().splitlines()[0] == "Identifier\ta\t1:1"


def test_every_fixture_reconstructs():
    files = [*data_dir().glob("*/*.sv"), *data_dir().glob("listings/*.txt")]
    assert files
    for f in files:
        raw = f.read_bytes()
        assert tokenize(raw).reconstruct() == raw


def _check_cover(data: bytes):
    stream = tokenize(data)
    segs = stream.segments()
    pos = 0
    for s in segs:
        assert s.span.offset == pos
        pos = s.span.end
    assert pos == len(data)
    assert stream.reconstruct() == data


@given(st.binary(max_size=300))
def test_total_and_lossless_on_arbitrary_bytes(data):
    _check_cover(data)


_verilogish = st.lists(st.sampled_from(
    ["module", "m", " ", "\n", "(", ")", ";", "[", "]", ":", "7", "'", "h", "F", "<", "=", "/", "*",
     '"', "\\", "$", "`", "_", "a1", "//", "\t", "é", "-", "@"]), max_size=80).map("".join)


@given(_verilogish)
def test_total_and_lossless_on_verilog_like_text(text):
    _check_cover(text.encode())


@given(_verilogish, st.sampled_from(["  ", "\n", " /* note */ ", " // c\n"]))
def test_count_invariant_under_formatting(text, filler):
    toks = tokenize(text).lexemes()
    if any(t.startswith(("/", "*", "\\", '"', "`", "$")) for t in toks):
        return  # separators could merge into comments, strings or escaped names
    spaced = filler.join(toks)
    assert tokenize(spaced).lexemes() == toks
