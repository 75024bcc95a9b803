"""Renderer semantics: values, errors, spans, and the computation graph."""

import json

import pytest

from symgen.data import Path, load_document
from symgen.errors import EvalError
from symgen.render import (
    DEFAULT_POLICY,
    Env,
    RenderPolicy,
    evaluate_expr,
    extract_final_answer,
    format_float,
    render,
    render_or_fallback,
    render_result_from_json,
    render_result_to_json,
)
from symgen.template import Literal, parse_template


def make_env(data, **kwargs):
    return Env(document=load_document({"data": data}), **kwargs)


def run(template, data, **kwargs):
    return render_or_fallback(template, make_env(data, **kwargs))


def eval_one(expr_text, data, vars=None):
    ast = parse_template("{{ " + expr_text + " }}")
    env = make_env(data)
    if vars:
        env.vars.update(vars)
    return evaluate_expr(ast.segments[0].expr, env)


def eval_cause(expr_text, data, vars=None):
    with pytest.raises(EvalError) as info:
        eval_one(expr_text, data, vars)
    return info.value.cause


# -------------------------------------------------------------------
# Scalar evaluation and stringification
# -------------------------------------------------------------------

def test_scalar_outputs():
    assert run("{{ data.s }}", {"s": "Ohio"}).text == "Ohio"
    assert run("{{ data.i }}", {"i": 95}).text == "95"
    assert run("{{ data.f }}", {"f": 44.5}).text == "44.5"
    assert run("{{ data.t }}", {"t": True}).text == "true"
    assert run("{{ data.t }}", {"t": False}).text == "false"


def test_float_formatting():
    assert format_float(18.0) == "18"
    assert format_float(0.1) == "0.1"
    assert format_float(-0.0) == "0"
    assert format_float(132.31) == "132.31"
    assert format_float(1 / 3) == repr(1 / 3)
    assert run("{{ 90 / 5 }}", {}).text == "18"
    assert run("{{ 1 / 4 }}", {}).text == "0.25"


def test_arithmetic_type_rules():
    assert eval_one("2 + 3", {}) == 5
    assert isinstance(eval_one("2 + 3", {}), int)
    assert eval_one("2 * 3.0", {}) == 6.0
    assert isinstance(eval_one("2 * 3.0", {}), float)
    assert eval_one("7 / 2", {}) == 3.5
    assert eval_one("7 // 2", {}) == 3
    assert isinstance(eval_one("7 // 2", {}), int)
    assert eval_one("7 % 3", {}) == 1
    assert eval_one("-data.n", {"n": 4}) == -4
    assert eval_one("7.0 // 2", {}) == 3.0


def test_arithmetic_errors():
    assert eval_cause("1 / 0", {}) == "division_by_zero"
    assert eval_cause("1 // 0", {}) == "division_by_zero"
    assert eval_cause("1 % 0", {}) == "division_by_zero"
    assert eval_cause("1 / 0.0", {}) == "division_by_zero"
    assert eval_cause("'a' + 'b'", {}) == "type_mismatch"
    assert eval_cause("'ab' * 2", {}) == "type_mismatch"
    assert eval_cause("data.flag + 1", {"flag": True}) == "type_mismatch"
    assert eval_cause("-data.s", {"s": "x"}) == "type_mismatch"
    assert eval_cause("1e308 * 10", {}) == "bad_argument"


def test_path_and_lookup_errors():
    assert eval_cause("data.missing", {"present": 1}) == "missing_key"
    assert eval_cause("data.xs[5]", {"xs": [1]}) == "index_out_of_bounds"
    assert eval_cause("data.xs[-1]", {"xs": [1]}) == "index_out_of_bounds"
    assert eval_cause("data.s[0]", {"s": "abc"}) == "type_mismatch"
    assert eval_cause("data.xs['k']", {"xs": [1]}) == "type_mismatch"
    assert eval_cause("data.o[0]", {"o": {"k": 1}}) == "type_mismatch"
    assert eval_one("data.o['k']", {"o": {"k": 7}}) == 7
    assert eval_one("data.xs[1]", {"xs": [1, 2]}) == 2


def test_dynamic_lookup():
    assert eval_one("data.xs[data.i]", {"xs": [10, 20, 30], "i": 2}) == 30
    assert eval_cause("data.xs[data.f]", {"xs": [1], "f": 1.0}) == "type_mismatch"


def test_string_methods():
    data = {"ascents": "Pico de Orizaba, Aconcgua, Grand Teton, Cerro Fitzroy"}
    assert eval_one("data.ascents.split(', ')[0]", data) == "Pico de Orizaba"
    assert eval_one("data.ascents.split(', ')[3]", data) == "Cerro Fitzroy"
    assert eval_one("'  x '.strip()", {}) == "x"
    assert eval_one("'a-b'.replace('-', ' ')", {}) == "a b"
    assert eval_one("'Abel'.lower()", {}) == "abel"
    assert eval_one("'abel'.upper()", {}) == "ABEL"
    assert eval_one("'niels henrik abel'.title()", {}) == "Niels Henrik Abel"


def test_method_errors():
    assert eval_cause("data.name.startswith('A')", {"name": "Abel"}) == "unknown_method"
    assert eval_cause("data.n.split(',')", {"n": 5}) == "type_mismatch"
    assert eval_cause("'a'.split()", {}) == "bad_argument"
    assert eval_cause("'a'.split(',', ';')", {}) == "bad_argument"
    assert eval_cause("'a'.split(1)", {}) == "bad_argument"
    assert eval_cause("'a'.split('')", {}) == "bad_argument"
    assert eval_cause("'a'.replace('a')", {}) == "bad_argument"
    assert eval_cause("'a'.strip('x')", {}) == "bad_argument"


def test_variables_and_sentinel():
    result = run(
        "{% set initial_trees = 15 %}{% set final_trees = 21 %}"
        "{{ final_trees - initial_trees }}",
        {},
    )
    assert result.text == "6"
    assert eval_cause("ghost", {}) == "unbound_variable"
    # a failed set binds a sentinel; reading it is itself a local error
    result = run("{% set v = data.nope %}[{{ v }}]", {"x": 1})
    assert result.text == "[undefined]"
    assert [e.cause for e in result.local_errors] == ["missing_key", "unbound_variable"]


def test_set_emits_nothing_and_keeps_surrounding_bytes():
    result = run(
        "There are 15 trees originally{% set initial_trees = 15 %}. Then", {}
    )
    assert result.text == "There are 15 trees originally. Then"


def test_reassignment_is_a_new_version():
    result = run(
        "{% set x = 1 %}{{ x }} {% set x = x + 1 %}{{ x }}", {}
    )
    assert result.text == "1 2"
    sets = [n for n in result.graph.nodes if n.kind == "set"]
    assert [(n.var, n.version, n.value) for n in sets] == [("x", 1, 1), ("x", 2, 2)]
    # the second assignment depends on the first
    assert any(
        e.src == "x@2" and e.dst == "x@1" and e.kind == "var"
        for e in result.graph.edges
    )


# -------------------------------------------------------------------
# Local and global error policy
# -------------------------------------------------------------------

def test_missing_key_renders_undefined_once():
    result = run("born in {{ data.place_of_birth }}", {"name": "Abel"})
    assert result.text == "born in undefined"
    assert len(result.local_errors) == 1
    assert result.local_errors[0].cause == "missing_key"
    assert result.global_error is None


def test_null_renders_undefined_and_counts():
    result = run("{{ data.DividendDate }}", {"DividendDate": None})
    assert result.text == "undefined"
    assert [e.cause for e in result.local_errors] == ["null_value"]
    assert result.spans[0].status == "undefined"


def test_composite_output_is_type_mismatch():
    result = run("{{ data.o }} {{ data.xs }}", {"o": {"a": 1}, "xs": [1, 2]})
    assert result.text == "undefined undefined"
    assert [e.cause for e in result.local_errors] == ["type_mismatch", "type_mismatch"]


def test_parse_failure_is_global():
    result = run("{{ data.50DayMovingAverage }}", {"50DayMovingAverage": 132.31})
    assert result.text == "The text is not available."
    assert result.global_error is not None
    assert result.spans == ()
    assert result.local_errors == ()
    # bracket form is the valid spelling for such keys
    ok = run("{{ data['50DayMovingAverage'] }}", {"50DayMovingAverage": 132.31})
    assert ok.text == "132.31"


def test_policy_text_is_configurable():
    policy = RenderPolicy(undefined_text="???", global_failure_text="(gone)")
    assert run("{{ data.x }}", {}, policy=policy).text == "???"
    assert run("{{ broken", {}, policy=policy).text == "(gone)"
    assert DEFAULT_POLICY.undefined_text == "undefined"
    assert DEFAULT_POLICY.global_failure_text == "The text is not available."


def test_literal_undefined_is_not_an_error():
    result = run("undefined {{ data.x }}", {"x": 1})
    assert result.text == "undefined 1"
    assert result.local_errors == ()
    assert len(result.spans) == 1  # only the output has a span


# -------------------------------------------------------------------
# Spans and the computation graph
# -------------------------------------------------------------------

def assert_span_coverage(template, data):
    env = make_env(data)
    ast = parse_template(template)
    result = render(ast, env)
    raw = result.text.encode("utf-8")
    last = 0
    for span in result.spans:
        assert span.start >= last, "spans must not overlap"
        assert raw[span.start : span.end].decode("utf-8") == span.value_rendered
        last = span.end
    # bytes outside spans are exactly the literal segments, in order
    outside = []
    pos = 0
    for span in result.spans:
        outside.append(raw[pos : span.start])
        pos = span.end
    outside.append(raw[pos:])
    literals = b"".join(
        s.text.encode("utf-8") for s in ast.segments if isinstance(s, Literal)
    )
    assert b"".join(outside) == literals
    return result


def test_span_coverage_and_unicode_offsets():
    result = assert_span_coverage(
        "Atlético «{{ data.city }}» — né {{ data.n }}", {"city": "São Paulo", "n": 7}
    )
    assert result.spans[0].value_rendered == "São Paulo"
    assert result.spans[1].value_rendered == "7"


def test_span_coverage_with_errors_and_sets():
    result = assert_span_coverage(
        "{% set a = data.x * 2 %}a={{ a }}, bad={{ data.nope }}, t={{ data.t }}",
        {"x": 21, "t": "ok"},
    )
    statuses = [s.status for s in result.spans]
    assert statuses == ["ok", "undefined", "ok"]


def test_spans_distinguish_literal_undefined_from_error():
    result = run("undefined vs {{ data.gone }}", {})
    (span,) = result.spans
    assert result.text == "undefined vs undefined"
    assert (span.start, span.end) == (13, 22)
    assert span.status == "undefined"


def test_referenced_paths_are_transitive():
    result = run(
        "{% set total_people = data.group_size * data.n_groups %}"
        "{% set per_bus = total_people / data.buses %}"
        "{{ per_bus }}",
        {"group_size": 5, "n_groups": 18, "buses": 2},
    )
    (span,) = result.spans
    assert result.text == "45"
    assert span.referenced_vars == ("per_bus",)
    assert {p.text() for p in span.referenced_paths} == {
        "data.group_size",
        "data.n_groups",
        "data.buses",
    }


def test_graph_is_acyclic_and_complete():
    result = run(
        "{% set a = data.x %}{% set b = a + 1 %}{{ b }}{{ data.y }}",
        {"x": 1, "y": 2},
    )
    ids = [n.id for n in result.graph.nodes]
    assert ids == ["a@1", "b@1", "out:0", "out:1"]
    seen = set()
    for node in result.graph.nodes:
        for edge in result.graph.edges:
            if edge.src == node.id and edge.kind == "var":
                assert edge.dst in seen, "edges must point to earlier nodes"
        seen.add(node.id)
    out0 = [e for e in result.graph.edges if e.src == "out:0"]
    assert [(e.dst, e.kind) for e in out0] == [("b@1", "var")]


def test_span_values_recompute_from_graph():
    """Evaluating a span from its recorded deps reproduces value_rendered."""
    result = run(
        "{% set half = data.total / 2 %}{{ half + data.bonus }} and {{ data.total }}",
        {"total": 90, "bonus": 1},
    )
    node_by_span = {n.span_index: n for n in result.graph.nodes if n.kind == "output"}
    var_nodes = {n.id: n for n in result.graph.nodes if n.kind == "set"}
    for i, span in enumerate(result.spans):
        node = node_by_span[i]
        vars_in = {}
        for edge in result.graph.edges:
            if edge.src == node.id and edge.kind == "var":
                dep = var_nodes[edge.dst]
                vars_in[dep.var] = dep.value
        mini = render_or_fallback(
            "{{ " + span.expr_source + " }}",
            Env(
                document=load_document({"data": {"total": 90, "bonus": 1}}),
                vars=vars_in,
            ),
        )
        assert mini.text == span.value_rendered


# -------------------------------------------------------------------
# Answers and the JSON wire form
# -------------------------------------------------------------------

def test_extract_final_answer():
    result = run("steps... Answer: {{ 6 * 7 }}", {})
    assert extract_final_answer(result) == "42"
    result = run("Answer: 1 then more Answer: {{ 2 + 3 }}", {})
    assert extract_final_answer(result) == "5"
    assert extract_final_answer(run("no marker {{ 1 }}", {})) is None
    assert extract_final_answer(run("{{ broken", {})) is None
    result = run("Réponse… Answer:   42  ", {})
    assert extract_final_answer(result) == "42"


def test_render_result_json_round_trip():
    result = run(
        "{% set x = data.a %}{{ x * 2 }} {{ data.missing }} «{{ data.u }}»",
        {"a": 4, "u": "é"},
    )
    payload = render_result_to_json(result)
    assert payload["schema_version"] == "symgen_provenance_v1"
    text = json.dumps(payload, ensure_ascii=False)
    again = render_result_from_json(json.loads(text))
    assert again == result


def test_render_result_json_round_trip_global():
    result = run("{{ nope", {})
    again = render_result_from_json(render_result_to_json(result))
    assert again == result
    assert again.global_error.message == result.global_error.message


def test_graph_values_survive_json():
    result = run("{% set v = 90 / 5 %}{{ v }}", {})
    payload = render_result_to_json(result)
    (set_node,) = [n for n in payload["graph"]["nodes"] if n["kind"] == "set"]
    assert set_node["value"] == 18.0
    assert render_result_from_json(payload) == result
