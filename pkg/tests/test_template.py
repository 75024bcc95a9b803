"""Lexer/parser/formatter for the reference language."""

import random

import pytest

from symgen.data import Path
from symgen.errors import ParseError, UnterminatedDelimiter, UnterminatedString
from symgen.template import (
    AttrOp,
    Binary,
    FloatLit,
    IndexOp,
    IntLit,
    Literal,
    MethodCall,
    Output,
    PathRef,
    SetStmt,
    StrLit,
    TemplateAst,
    Unary,
    VarRef,
    collect_references,
    format_expr,
    format_template,
    parse_template,
)


def seg_kinds(ast):
    return [type(s).__name__ for s in ast.segments]


def only_expr(text):
    ast = parse_template(text)
    (segment,) = [s for s in ast.segments if isinstance(s, Output)]
    return segment.expr


def test_parse_splits_literals_and_outputs():
    ast = parse_template("born in {{ data.place_of_birth }}, age {{ data.age }}.")
    assert seg_kinds(ast) == ["Literal", "Output", "Literal", "Output", "Literal"]
    assert ast.segments[0].text == "born in "
    assert ast.segments[2].text == ", age "
    assert ast.segments[4].text == "."


def test_source_spans_reconstruct_input_losslessly():
    text = "naïve {{ data.x }} — {% set n = 1 %}{{ n }} done"
    ast = parse_template(text)
    raw = text.encode("utf-8")
    rebuilt = b"".join(raw[s.span.start : s.span.end] for s in ast.segments)
    assert rebuilt == raw


def test_path_folding():
    expr = only_expr("{{ data.AMZN['50DayMovingAverage'] }}")
    assert expr == PathRef(Path(("data", "AMZN", "50DayMovingAverage")))
    expr = only_expr("{{ data.xs[0].y }}")
    assert expr == PathRef(Path(("data", "xs", 0, "y")))
    expr = only_expr("{{ data[0] }}")
    assert expr == PathRef(Path(("data", 0)))


def test_dynamic_index_stays_structural():
    expr = only_expr("{{ data.xs[i + 1] }}")
    assert isinstance(expr, IndexOp)
    assert expr.target == PathRef(Path(("data", "xs")))
    assert expr.index == Binary("+", VarRef("i"), IntLit(1))
    # negative literal index is a unary expression, not a path segment
    expr = only_expr("{{ data.xs[-1] }}")
    assert isinstance(expr, IndexOp)
    assert expr.index == Unary("-", IntLit(1))


def test_method_chain_parse_shape():
    expr = only_expr("{{ data.notable_ascents.split(', ')[0] }}")
    assert isinstance(expr, IndexOp)
    assert expr.index == IntLit(0)
    call = expr.target
    assert isinstance(call, MethodCall)
    assert call.name == "split"
    assert call.args == (StrLit(", "),)
    assert call.target == PathRef(Path(("data", "notable_ascents")))


def test_unknown_method_name_parses():
    """Whitelisting happens at evaluation, so odd method calls still parse."""
    expr = only_expr("{{ data.name.startswith('A') }}")
    assert isinstance(expr, MethodCall)
    assert expr.name == "startswith"


def test_attr_on_non_path_is_structural():
    expr = only_expr("{{ x.foo }}")
    assert expr == AttrOp(VarRef("x"), "foo")
    # a whitelisted name without a call is a plain key lookup
    expr = only_expr("{{ data.name.split }}")
    assert expr == PathRef(Path(("data", "name", "split")))


def test_number_literals():
    assert only_expr("{{ 42 }}") == IntLit(42)
    assert only_expr("{{ 2.5 }}") == FloatLit(2.5)
    assert only_expr("{{ 1e3 }}") == FloatLit(1000.0)
    assert only_expr("{{ 1.5e-2 }}") == FloatLit(0.015)
    # '.' not followed by a digit is postfix access, not a float
    expr = only_expr("{{ 1 . x }}")
    assert expr == AttrOp(IntLit(1), "x")


def test_string_literals_and_escapes():
    assert only_expr("{{ 'a, b' }}") == StrLit("a, b")
    assert only_expr('{{ "d\\"q" }}') == StrLit('d"q')
    assert only_expr("{{ 'tab\\t nl\\n bs\\\\' }}") == StrLit("tab\t nl\n bs\\")


def test_precedence():
    assert only_expr("{{ a + b * c }}") == Binary(
        "+", VarRef("a"), Binary("*", VarRef("b"), VarRef("c"))
    )
    assert only_expr("{{ (a + b) * c }}") == Binary(
        "*", Binary("+", VarRef("a"), VarRef("b")), VarRef("c")
    )
    assert only_expr("{{ a - b - c }}") == Binary(
        "-", Binary("-", VarRef("a"), VarRef("b")), VarRef("c")
    )
    assert only_expr("{{ -a * b }}") == Binary(
        "*", Unary("-", VarRef("a")), VarRef("b")
    )
    assert only_expr("{{ 10 // 3 % 2 }}") == Binary(
        "%", Binary("//", IntLit(10), IntLit(3)), IntLit(2)
    )


def test_set_statement():
    ast = parse_template("{% set bagel_cost = bagel_price * bagel_count %}")
    (stmt,) = ast.segments
    assert isinstance(stmt, SetStmt)
    assert stmt.name == "bagel_cost"
    assert stmt.expr == Binary("*", VarRef("bagel_price"), VarRef("bagel_count"))
    assert stmt.expr_source == "bagel_price * bagel_count"


def test_set_accepts_string_rhs():
    # semantic failures (like doing arithmetic on it later) are not parse errors
    ast = parse_template("{% set initial_marbles = 'x' %}")
    assert ast.segments[0].expr == StrLit("x")


def test_parse_error_identifier_starting_with_digit():
    with pytest.raises(ParseError) as info:
        parse_template("{{ data.50DayMovingAverage }}")
    assert "digit" in str(info.value)
    assert info.value.position == 8


def test_parse_error_chained_assignment():
    with pytest.raises(ParseError) as info:
        parse_template("{% set red_paint = white_paint = purple_paint %}")
    assert "chained assignment" in str(info.value)


def test_parse_error_on_other_statements():
    with pytest.raises(ParseError):
        parse_template("{% if x %}yes{% endif %}")
    with pytest.raises(ParseError):
        parse_template("{% for x in xs %}{{ x }}{% endfor %}")
    with pytest.raises(ParseError):
        parse_template("{%- set x = 1 -%}")


def test_parse_error_unterminated():
    with pytest.raises(UnterminatedDelimiter):
        parse_template("before {{ data.x")
    with pytest.raises(UnterminatedDelimiter):
        parse_template("{% set x = 1")
    with pytest.raises(UnterminatedString):
        parse_template("{{ 'oops }}")


def test_parse_error_misc():
    with pytest.raises(ParseError):
        parse_template("{{ }}")
    with pytest.raises(ParseError):
        parse_template("{{ a b }}")
    with pytest.raises(ParseError):
        parse_template("{{ a ? b }}")
    with pytest.raises(ParseError):
        parse_template("{{ x | upper }}")
    with pytest.raises(ParseError):
        parse_template("{% set x %}")
    with pytest.raises(ParseError):
        parse_template("{{ foo(1) }}")
    with pytest.raises(ParseError):
        parse_template("{{ data.x %}")


def test_literal_braces_untouched():
    ast = parse_template("a { b } c }} d {not a tag}")
    assert seg_kinds(ast) == ["Literal"]
    assert ast.segments[0].text == "a { b } c }} d {not a tag}"


def test_format_canonical_spacing():
    ast = parse_template("{{a+b*c}}")
    assert format_template(ast) == "{{ a + b * c }}"
    ast = parse_template("{%set x=1%}")
    assert format_template(ast) == "{% set x = 1 %}"


def test_format_minimal_parens():
    assert format_expr(only_expr("{{ (a + b) * c }}")) == "(a + b) * c"
    assert format_expr(only_expr("{{ a + (b * c) }}")) == "a + b * c"
    assert format_expr(only_expr("{{ a - (b - c) }}")) == "a - (b - c)"
    assert format_expr(only_expr("{{ (a + b)[0] }}")) == "(a + b)[0]"
    assert format_expr(only_expr("{{ -(a + b) }}")) == "-(a + b)"
    assert format_expr(only_expr("{{ data.s.split(', ')[1] }}")) == "data.s.split(', ')[1]"


def test_format_is_fixed_point_after_one_pass():
    messy = "x {{a  +b}} y {%set  q= data.n.split( ',' ) [ 2 ]%} z {{ q }}"
    once = format_template(parse_template(messy))
    twice = format_template(parse_template(once))
    assert once == twice


def _random_expr(rng, depth):
    """Grammar-shaped random AST for the formatter property check."""
    atoms = [
        lambda: IntLit(rng.randrange(0, 500)),
        lambda: FloatLit(round(rng.uniform(0, 99), 3)),
        lambda: StrLit(rng.choice(["a, b", "x", "it's", 'quo"te', "tab\there"])),
        lambda: VarRef(rng.choice(["x", "y", "total", "n2"])),
        lambda: PathRef(
            Path(
                ("data",)
                + tuple(
                    rng.choice(["a", "b c", "50Day", 0, 2])
                    for _ in range(rng.randrange(1, 3))
                )
            )
        ),
    ]
    if depth <= 0:
        return rng.choice(atoms)()
    roll = rng.random()
    if roll < 0.30:
        return Binary(
            rng.choice(["+", "-", "*", "/", "//", "%"]),
            _random_expr(rng, depth - 1),
            _random_expr(rng, depth - 1),
        )
    if roll < 0.40:
        return Unary("-", _random_expr(rng, depth - 1))
    if roll < 0.55:
        return IndexOp(_random_expr(rng, depth - 1), _random_expr(rng, depth - 1))
    if roll < 0.65:
        return AttrOp(_random_expr(rng, depth - 1), rng.choice(["foo", "k9", "_v"]))
    if roll < 0.75:
        return MethodCall(
            _random_expr(rng, depth - 1),
            rng.choice(["split", "strip", "replace", "lower", "upper", "title"]),
            tuple(_random_expr(rng, depth - 1) for _ in range(rng.randrange(0, 3))),
        )
    return rng.choice(atoms)()


def _strip_spans(ast):
    shape = []
    for seg in ast.segments:
        if isinstance(seg, Literal):
            shape.append(("lit", seg.text))
        elif isinstance(seg, Output):
            shape.append(("out", seg.expr))
        else:
            shape.append(("set", seg.name, seg.expr))
    return shape


def test_parse_format_parse_is_parse():
    """parse -> format -> parse reaches a fixed point for random ASTs."""
    rng = random.Random(99173)
    checked = 0
    for _ in range(1200):
        n_segments = rng.randrange(1, 4)
        segments = []
        for _ in range(n_segments):
            kind = rng.random()
            if kind < 0.5:
                segments.append(("out", _random_expr(rng, rng.randrange(0, 4))))
            else:
                segments.append(
                    (
                        "set",
                        rng.choice(["v", "w", "acc"]),
                        _random_expr(rng, rng.randrange(0, 4)),
                    )
                )
        text_parts = []
        for seg in segments:
            if seg[0] == "out":
                text_parts.append("{{ " + format_expr(seg[1]) + " }}")
            else:
                text_parts.append("{% set " + seg[1] + " = " + format_expr(seg[2]) + " %}")
            text_parts.append(rng.choice(["", " and ", "\n", " é—", ". "]))
        text = "".join(text_parts)
        first = parse_template(text)
        second = parse_template(format_template(first))
        assert _strip_spans(first) == _strip_spans(second), text
        checked += 1
    assert checked >= 1000


def test_collect_references():
    ast = parse_template(
        "{% set total = data.a + data.b %}"
        "{{ total / data.n }} {{ ghost }} {% set total = total + 1 %}"
    )
    report = collect_references(ast)
    assert report.paths == (
        Path(("data", "a")),
        Path(("data", "b")),
        Path(("data", "n")),
    )
    assert report.var_reads == ("total", "ghost")
    assert report.assignments == ("total",)
    assert report.unbound == (("ghost", 3),)
    by_index = {s.index: s for s in report.per_segment}
    assert by_index[0].assigns == "total"
    assert by_index[1].var_reads == ("total",)
    assert by_index[5].unbound == ()


def test_collect_references_dedupes_paths():
    ast = parse_template("{{ data.x + data.x }}{{ data.x }}")
    report = collect_references(ast)
    assert report.paths == (Path(("data", "x")),)


def test_custom_data_root():
    ast = parse_template("{{ doc.x }}", data_root="doc")
    assert ast.segments[0].expr == PathRef(Path(("doc", "x")))
    # with the default root, "doc" is just a variable
    ast = parse_template("{{ doc.x }}")
    assert ast.segments[0].expr == AttrOp(VarRef("doc"), "x")
