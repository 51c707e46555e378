import json

import pytest
from hypothesis import given, strategies as st

from sinklab.promptkit import (
    DesignSpec,
    ModuleSpec,
    SpecError,
    load_spec,
    port_line_error,
    render_prompt,
    validate_spec,
)
from sinklab.resources import data_path

HEADER = ("Design and implement these modules for an NPU coprocessor.\n"
          "This NPU uses bfloat16 as the native data type. This NPU\n"
          "accelerates vector-vector and vector-scalar addition,\n"
          "subtraction, multiplication, division.")
PORTS = ["input logic [WIDTH-1:0] a,", "input logic [WIDTH-1:0] b,", "output logic [WIDTH-1:0] result"]
EXPLANATION = ("instantiates scalar_regs, vector_regs,\n16 processing_elements. Handles load, store, execution\n"
               "and writeback.")


def parse_rendered(text):
    """Inverse of the rendered layout (test-only)."""
    blocks = text.rstrip("\n").split("\n\n")
    spec = {"header": blocks[0], "modules": [], "global_guidelines": []}
    for block in blocks[1:]:
        lines = block.split("\n")
        if lines[0] == "guidelines:":
            spec["global_guidelines"] = [ln[3:] for ln in lines[1:]]
            continue
        mod = {"name": lines[0][len("module: "):], "ports": [], "notes": []}
        i = 1
        if lines[i] == "ports:":
            i += 1
            while lines[i].startswith(" "):
                mod["ports"].append(lines[i][1:])
                i += 1
        expl = [lines[i][len("explanation: "):]]
        i += 1
        while i < len(lines) and lines[i] != "notes:":
            expl.append(lines[i])
            i += 1
        mod["explanation"] = "\n".join(expl)
        if i < len(lines):
            mod["notes"] = [ln[3:] for ln in lines[i + 1:]]
        spec["modules"].append(mod)
    return spec


def test_listing_blocks_rendered_in_order():
    spec = DesignSpec(HEADER, [ModuleSpec("npu", EXPLANATION, PORTS)])
    text = render_prompt(spec)
    ports_block = "ports:\n" + "\n".join(" " + p for p in PORTS)
    i, j, k = text.index(HEADER), text.index(ports_block), text.index("explanation: " + EXPLANATION)
    assert i < j < k


def test_header_only_prompt():
    assert render_prompt(DesignSpec(HEADER)) == HEADER + "\n"


def test_render_is_deterministic():
    spec = load_spec(data_path("npu_spec.json"))
    assert render_prompt(spec) == render_prompt(load_spec(data_path("npu_spec.json")))


def test_shipped_spec_validates():
    spec = load_spec(data_path("npu_spec.json"))
    assert validate_spec(spec) == []
    assert [m.name for m in spec.modules][-1] == "npu"


def test_duplicate_name_reported_once():
    spec = DesignSpec(HEADER, [ModuleSpec("pe", "x"), ModuleSpec("pe", "y")])
    errs = validate_spec(spec)
    assert [e.code for e in errs] == ["duplicate-name"]


def test_unbalanced_port_line_named():
    bad = "output logic [WIDTH-1:0 result"
    errs = validate_spec(DesignSpec(HEADER, [ModuleSpec("pe", "x", [bad])]))
    assert len(errs) == 1 and errs[0].code == "port" and bad in errs[0].message
    with pytest.raises(SpecError):
        render_prompt(DesignSpec(HEADER, [ModuleSpec("pe", "x", [bad])]))


@pytest.mark.parametrize("line,ok", [
    ("input logic clk,", True),
    ("output logic [15:0] result", True),
    ("input logic [$clog2(4)-1:0] vector_wr_addr,", True),
    ("logic clk", False),
    ("input logic [3:0]", False),
    ("input logic a, b,", False),
    ("input \xff a", False),
])
def test_port_line_checks(line, ok):
    assert (port_line_error(line) is None) == ok


def test_empty_explanation_and_reserved_keys():
    errs = validate_spec(DesignSpec(HEADER, [ModuleSpec("pe", "  "), ModuleSpec("q", "a\nports: x")]))
    assert sorted(e.code for e in errs) == ["empty", "format"]


def test_errors_are_collected_not_raised():
    spec = DesignSpec("", [ModuleSpec("1bad", ""), ModuleSpec("1bad", "", ["nope"])])
    assert len(validate_spec(spec)) >= 5


def test_load_reports_json_errors(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"header": "x", "modules": [')
    with pytest.raises(SpecError, match="byte"):
        load_spec(p)
    p.write_text(json.dumps({"modules": "no"}))
    with pytest.raises(SpecError):
        load_spec(p)


def test_roundtrip_shipped_spec():
    spec = load_spec(data_path("npu_spec.json"))
    assert parse_rendered(render_prompt(spec)) == spec.to_dict()


_word = st.text(alphabet="abcdefghij ,.", min_size=1, max_size=12).map(str.strip).filter(bool)
_ident = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True).filter(
    lambda s: s not in {"do", "if", "for", "and", "or", "not", "end", "bit", "int", "new", "ref", "var", "use",
                        "let", "buf", "wor", "tri", "xor", "nor", "nand", "cell", "wire", "case", "else"})
_port = st.builds(lambda d, w, n: f"{d} logic [{w}:0] {n},", st.sampled_from(["input", "output"]),
                  st.integers(0, 31), _ident)
_module = st.builds(lambda n, e, p, notes: {"name": n, "explanation": e, "ports": p, "notes": notes},
                    _ident, _word, st.lists(_port, max_size=3), st.lists(_word, max_size=2))


@given(_word, st.lists(_module, max_size=4, unique_by=lambda m: m["name"]), st.lists(_word, max_size=3))
def test_roundtrip_and_injectivity(header, modules, guidelines):
    spec = DesignSpec.from_dict({"header": header, "modules": modules, "global_guidelines": guidelines})
    if validate_spec(spec):
        return
    text = render_prompt(spec)
    assert parse_rendered(text) == spec.to_dict()
