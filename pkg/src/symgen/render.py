"""Evaluation and rendering with span-level provenance.

Rendering applies a two-tier error policy: an expression that fails to
evaluate renders as the policy's undefined text and is recorded as a *local*
error, while template text that does not parse at all replaces the entire
output with the policy's failure text — a *global* error.  Every non-literal
byte of output is covered by exactly one provenance span, and variable
assignments build an acyclic computation graph that lets a span's value be
re-derived from its recorded dependencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .data import DataDocument, Path, Value, kind_name, parse_path_text, resolve_path
from .errors import (
    EvalError,
    IndexOutOfBounds,
    MissingKey,
    ParseError,
    RENDER_CAUSES,
    TypeMismatch,
)
from .template import (
    AttrOp,
    Binary,
    Expr,
    FloatLit,
    IndexOp,
    IntLit,
    Literal,
    METHOD_WHITELIST,
    MethodCall,
    Output,
    PathRef,
    SetStmt,
    StrLit,
    TemplateAst,
    Unary,
    VarRef,
    expr_references,
    parse_template,
)

SCHEMA_VERSION = "symgen_provenance_v1"


@dataclass(frozen=True)
class RenderPolicy:
    """What failures render as."""

    undefined_text: str = "undefined"
    global_failure_text: str = "The text is not available."


DEFAULT_POLICY = RenderPolicy()


class _Failed:
    """Sentinel bound to a variable whose assignment failed."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "<failed>"


FAILED = _Failed()


@dataclass
class Env:
    """Evaluation environment: the document, variable bindings, policy."""

    document: DataDocument
    vars: dict = field(default_factory=dict)
    policy: RenderPolicy = DEFAULT_POLICY


# --------------------------------------------------------------------------
# Expression evaluation
# --------------------------------------------------------------------------

def _is_number(value) -> bool:
    # bool is an int subclass; it is not a number here
    return type(value) in (int, float)


def evaluate_expr(expr: Expr, env: Env) -> Value:
    """Evaluate one expression. Raises :class:`EvalError` on any failure."""
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, FloatLit):
        return expr.value
    if isinstance(expr, StrLit):
        return expr.value
    if isinstance(expr, PathRef):
        try:
            return resolve_path(env.document, expr.path)
        except MissingKey as exc:
            raise EvalError("missing_key", str(exc), path=expr.path) from None
        except IndexOutOfBounds as exc:
            raise EvalError("index_out_of_bounds", str(exc), path=expr.path) from None
        except TypeMismatch as exc:
            raise EvalError("type_mismatch", str(exc), path=expr.path) from None
    if isinstance(expr, VarRef):
        if expr.name not in env.vars:
            raise EvalError(
                "unbound_variable", f"variable {expr.name!r} is not defined"
            )
        value = env.vars[expr.name]
        if value is FAILED:
            raise EvalError(
                "unbound_variable",
                f"variable {expr.name!r} failed to evaluate earlier",
            )
        return value
    if isinstance(expr, Unary):
        operand = evaluate_expr(expr.operand, env)
        if not _is_number(operand):
            raise EvalError(
                "type_mismatch", f"cannot negate {kind_name(operand)}"
            )
        return -operand
    if isinstance(expr, Binary):
        return _eval_binary(expr, env)
    if isinstance(expr, AttrOp):
        target = evaluate_expr(expr.target, env)
        if not isinstance(target, dict):
            raise EvalError(
                "type_mismatch",
                f"cannot look up key {expr.key!r} in {kind_name(target)}",
            )
        if expr.key not in target:
            raise EvalError("missing_key", f"key {expr.key!r} not found")
        return target[expr.key]
    if isinstance(expr, IndexOp):
        return _eval_index(expr, env)
    if isinstance(expr, MethodCall):
        return _eval_method(expr, env)
    raise TypeError(f"not an expression: {expr!r}")


def _eval_binary(expr: Binary, env: Env) -> Value:
    left = evaluate_expr(expr.left, env)
    right = evaluate_expr(expr.right, env)
    if not _is_number(left) or not _is_number(right):
        raise EvalError(
            "type_mismatch",
            f"cannot apply {expr.op!r} to {kind_name(left)} and {kind_name(right)}",
        )
    if expr.op in ("/", "//", "%") and right == 0:
        raise EvalError("division_by_zero", f"division by zero in {expr.op!r}")
    try:
        if expr.op == "+":
            result = left + right
        elif expr.op == "-":
            result = left - right
        elif expr.op == "*":
            result = left * right
        elif expr.op == "/":
            result = left / right
        elif expr.op == "//":
            result = left // right
        else:
            result = left % right
    except OverflowError:
        raise EvalError("bad_argument", "arithmetic overflow") from None
    # float arithmetic overflows to inf silently; documents cannot hold
    # non-finite numbers, so surface it as an error instead
    if isinstance(result, float) and not math.isfinite(result):
        raise EvalError("bad_argument", "arithmetic overflow")
    return result


def _eval_index(expr: IndexOp, env: Env) -> Value:
    target = evaluate_expr(expr.target, env)
    index = evaluate_expr(expr.index, env)
    if isinstance(target, list):
        if type(index) is not int:
            raise EvalError(
                "type_mismatch",
                f"array index must be Int, got {kind_name(index)}",
            )
        if not 0 <= index < len(target):
            raise EvalError(
                "index_out_of_bounds",
                f"index {index} out of bounds for array of length {len(target)}",
            )
        return target[index]
    if isinstance(target, dict):
        if not isinstance(index, str):
            raise EvalError(
                "type_mismatch",
                f"object key must be Str, got {kind_name(index)}",
            )
        if index not in target:
            raise EvalError("missing_key", f"key {index!r} not found")
        return target[index]
    raise EvalError(
        "type_mismatch", f"cannot index into {kind_name(target)}"
    )


def _eval_method(expr: MethodCall, env: Env) -> Value:
    if expr.name not in METHOD_WHITELIST:
        raise EvalError("unknown_method", f"unknown method {expr.name!r}")
    target = evaluate_expr(expr.target, env)
    if not isinstance(target, str):
        raise EvalError(
            "type_mismatch",
            f".{expr.name}() needs a Str receiver, got {kind_name(target)}",
        )
    args = [evaluate_expr(arg, env) for arg in expr.args]

    def str_args(expected: int) -> list[str]:
        if len(args) != expected:
            raise EvalError(
                "bad_argument",
                f".{expr.name}() takes {expected} argument(s), got {len(args)}",
            )
        for arg in args:
            if not isinstance(arg, str):
                raise EvalError(
                    "bad_argument",
                    f".{expr.name}() arguments must be Str, got {kind_name(arg)}",
                )
        return args

    if expr.name == "split":
        (sep,) = str_args(1)
        if sep == "":
            raise EvalError("bad_argument", ".split() separator must be non-empty")
        return target.split(sep)
    if expr.name == "replace":
        old, new = str_args(2)
        return target.replace(old, new)
    str_args(0)
    if expr.name == "strip":
        return target.strip()
    if expr.name == "lower":
        return target.lower()
    if expr.name == "upper":
        return target.upper()
    return target.title()


# --------------------------------------------------------------------------
# Value stringification
# --------------------------------------------------------------------------

def format_float(value: float) -> str:
    """Shortest round-trip form; integral floats print with no fraction."""
    if value.is_integer():
        return str(int(value))
    return repr(value)


def stringify(value: Value) -> str:
    """Output form of a scalar value. Composites and Null do not stringify;
    the renderer handles those as errors per policy."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if type(value) is int:
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    raise EvalError(
        "type_mismatch", f"cannot render {kind_name(value)} as text"
    )


# --------------------------------------------------------------------------
# Render results
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProvenanceSpan:
    """One non-literal stretch of rendered output."""

    start: int  # UTF-8 byte offset into the rendered text
    end: int
    expr_source: str
    referenced_paths: tuple[Path, ...]
    referenced_vars: tuple[str, ...]
    value_rendered: str
    status: str  # "ok" | "undefined"


@dataclass(frozen=True)
class LocalError:
    expr_source: str
    cause: str
    start: int
    end: int

    def __post_init__(self):
        if self.cause not in RENDER_CAUSES:
            raise ValueError(f"unknown render cause: {self.cause!r}")


@dataclass(frozen=True)
class GlobalError:
    message: str
    position: int | None = None


@dataclass(frozen=True)
class GraphNode:
    """A variable assignment or an output segment in the computation graph."""

    id: str
    kind: str  # "set" | "output"
    expr_source: str
    ok: bool
    value: Value = None
    var: str | None = None
    version: int | None = None
    span_index: int | None = None


@dataclass(frozen=True)
class GraphEdge:
    src: str  # the node that *uses*
    dst: str  # a node id (kind="var") or a canonical path (kind="path")
    kind: str  # "var" | "path"


@dataclass(frozen=True)
class ComputationGraph:
    nodes: tuple[GraphNode, ...] = ()
    edges: tuple[GraphEdge, ...] = ()


@dataclass(frozen=True)
class RenderResult:
    text: str
    spans: tuple[ProvenanceSpan, ...] = ()
    local_errors: tuple[LocalError, ...] = ()
    global_error: GlobalError | None = None
    graph: ComputationGraph = ComputationGraph()


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

def render(ast: TemplateAst, env: Env) -> RenderResult:
    """Render a parsed template against an environment.

    Never raises for content-level problems: every evaluation failure
    becomes policy text plus a local error record.
    """
    policy = env.policy
    pieces: list[str] = []
    byte_pos = 0
    spans: list[ProvenanceSpan] = []
    local_errors: list[LocalError] = []
    nodes: list[GraphNode] = []
    edges: list[GraphEdge] = []

    var_version: dict[str, int] = {}
    var_node: dict[str, str] = {}  # name -> current node id
    var_paths: dict[str, tuple[Path, ...]] = {}  # transitive path deps
    output_count = 0

    def transitive_paths(direct: tuple[Path, ...], reads: tuple[str, ...]):
        seen: dict[Path, None] = {}
        for p in direct:
            seen.setdefault(p)
        for name in reads:
            for p in var_paths.get(name, ()):
                seen.setdefault(p)
        return tuple(seen)

    def dep_edges(node_id: str, direct: tuple[Path, ...], reads: tuple[str, ...]):
        for p in direct:
            edges.append(GraphEdge(src=node_id, dst=p.text(), kind="path"))
        for name in reads:
            if name in var_node:
                edges.append(GraphEdge(src=node_id, dst=var_node[name], kind="var"))

    for segment in ast.segments:
        if isinstance(segment, Literal):
            pieces.append(segment.text)
            byte_pos += len(segment.text.encode("utf-8"))
            continue

        direct_paths, reads = expr_references(segment.expr)

        if isinstance(segment, SetStmt):
            node_id = f"{segment.name}@{var_version.get(segment.name, 0) + 1}"
            dep_edges(node_id, direct_paths, reads)
            try:
                value = evaluate_expr(segment.expr, env)
            except EvalError as exc:
                env.vars[segment.name] = FAILED
                local_errors.append(
                    LocalError(
                        expr_source=segment.expr_source,
                        cause=exc.cause,
                        start=byte_pos,
                        end=byte_pos,
                    )
                )
                ok, value = False, None
            else:
                env.vars[segment.name] = value
                ok = True
            version = var_version.get(segment.name, 0) + 1
            var_version[segment.name] = version
            var_node[segment.name] = node_id
            var_paths[segment.name] = transitive_paths(direct_paths, reads)
            nodes.append(
                GraphNode(
                    id=node_id,
                    kind="set",
                    expr_source=segment.expr_source,
                    ok=ok,
                    value=value,
                    var=segment.name,
                    version=version,
                )
            )
            continue

        # Output segment
        node_id = f"out:{output_count}"
        output_count += 1
        dep_edges(node_id, direct_paths, reads)
        status = "ok"
        cause: str | None = None
        raw_value: Value = None
        try:
            raw_value = evaluate_expr(segment.expr, env)
            if raw_value is None:
                status, cause = "undefined", "null_value"
                rendered = policy.undefined_text
            else:
                rendered = stringify(raw_value)
        except EvalError as exc:
            status, cause = "undefined", exc.cause
            rendered = policy.undefined_text
            raw_value = None

        rendered_bytes = len(rendered.encode("utf-8"))
        span = ProvenanceSpan(
            start=byte_pos,
            end=byte_pos + rendered_bytes,
            expr_source=segment.expr_source,
            referenced_paths=transitive_paths(direct_paths, reads),
            referenced_vars=reads,
            value_rendered=rendered,
            status=status,
        )
        spans.append(span)
        if cause is not None:
            local_errors.append(
                LocalError(
                    expr_source=segment.expr_source,
                    cause=cause,
                    start=byte_pos,
                    end=byte_pos + rendered_bytes,
                )
            )
        nodes.append(
            GraphNode(
                id=node_id,
                kind="output",
                expr_source=segment.expr_source,
                ok=status == "ok",
                value=raw_value if status == "ok" else None,
                span_index=len(spans) - 1,
            )
        )
        pieces.append(rendered)
        byte_pos += rendered_bytes

    return RenderResult(
        text="".join(pieces),
        spans=tuple(spans),
        local_errors=tuple(local_errors),
        global_error=None,
        graph=ComputationGraph(nodes=tuple(nodes), edges=tuple(edges)),
    )


def render_or_fallback(
    source: str,
    env: Env,
    *,
    data_root: str = "data",
) -> RenderResult:
    """Parse and render; a parse failure yields the global failure text."""
    try:
        ast = parse_template(source, data_root=data_root)
    except ParseError as exc:
        return RenderResult(
            text=env.policy.global_failure_text,
            global_error=GlobalError(message=str(exc), position=exc.position),
        )
    return render(ast, env)


def extract_final_answer(result: RenderResult, marker: str = "Answer:") -> str | None:
    """Text after the last ``marker`` in the rendered output, trimmed."""
    if result.global_error is not None:
        return None
    idx = result.text.rfind(marker)
    if idx < 0:
        return None
    return result.text[idx + len(marker):].strip()


# --------------------------------------------------------------------------
# JSON wire form (schema: symgen_provenance_v1)
# --------------------------------------------------------------------------

def render_result_to_json(result: RenderResult) -> dict:
    out: dict = {
        "schema_version": SCHEMA_VERSION,
        "text": result.text,
        "spans": [
            {
                "start": s.start,
                "end": s.end,
                "expr_source": s.expr_source,
                "referenced_paths": [p.text() for p in s.referenced_paths],
                "referenced_vars": list(s.referenced_vars),
                "value_rendered": s.value_rendered,
                "status": s.status,
            }
            for s in result.spans
        ],
        "local_errors": [
            {
                "expr_source": e.expr_source,
                "cause": e.cause,
                "start": e.start,
                "end": e.end,
            }
            for e in result.local_errors
        ],
        "global_error": (
            None
            if result.global_error is None
            else {
                "message": result.global_error.message,
                "position": result.global_error.position,
            }
        ),
        "graph": {
            "nodes": [
                {
                    "id": n.id,
                    "kind": n.kind,
                    "expr_source": n.expr_source,
                    "ok": n.ok,
                    "value": n.value,
                    "var": n.var,
                    "version": n.version,
                    "span_index": n.span_index,
                }
                for n in result.graph.nodes
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "kind": e.kind}
                for e in result.graph.edges
            ],
        },
    }
    return out


def render_result_from_json(payload: Mapping) -> RenderResult:
    spans = tuple(
        ProvenanceSpan(
            start=s["start"],
            end=s["end"],
            expr_source=s["expr_source"],
            referenced_paths=tuple(parse_path_text(p) for p in s["referenced_paths"]),
            referenced_vars=tuple(s["referenced_vars"]),
            value_rendered=s["value_rendered"],
            status=s["status"],
        )
        for s in payload.get("spans", [])
    )
    local_errors = tuple(
        LocalError(
            expr_source=e["expr_source"],
            cause=e["cause"],
            start=e["start"],
            end=e["end"],
        )
        for e in payload.get("local_errors", [])
    )
    raw_global = payload.get("global_error")
    global_error = (
        None
        if raw_global is None
        else GlobalError(message=raw_global["message"], position=raw_global.get("position"))
    )
    graph_payload = payload.get("graph") or {}
    nodes = tuple(
        GraphNode(
            id=n["id"],
            kind=n["kind"],
            expr_source=n["expr_source"],
            ok=n["ok"],
            value=n.get("value"),
            var=n.get("var"),
            version=n.get("version"),
            span_index=n.get("span_index"),
        )
        for n in graph_payload.get("nodes", [])
    )
    edges = tuple(
        GraphEdge(src=e["from"], dst=e["to"], kind=e["kind"])
        for e in graph_payload.get("edges", [])
    )
    return RenderResult(
        text=payload["text"],
        spans=spans,
        local_errors=local_errors,
        global_error=global_error,
        graph=ComputationGraph(nodes=nodes, edges=edges),
    )
