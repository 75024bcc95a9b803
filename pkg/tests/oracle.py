"""Independent naive evaluator used as the differential-testing oracle.

Shares only the parser's AST shapes with the package; evaluation,
error handling, and stringification are reimplemented from scratch the
dumb way (recursive walk, try/except per segment).  Any divergence from
symgen.render on the same input is a bug in one of the two.
"""

from __future__ import annotations

from symgen.errors import ParseError
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
    Unary,
    VarRef,
    parse_template,
)

UNDEFINED = "undefined"
NOT_AVAILABLE = "The text is not available."

_METHODS = {"split", "strip", "replace", "lower", "upper", "title"}


class OracleError(Exception):
    pass


_FAILED_SET = object()


def oracle_render(source: str, root: dict) -> str:
    """Render template text against a parsed document root. Text only."""
    try:
        ast = parse_template(source)
    except ParseError:
        return NOT_AVAILABLE
    bindings: dict = {}
    out: list[str] = []
    for seg in ast.segments:
        if isinstance(seg, Literal):
            out.append(seg.text)
        elif isinstance(seg, SetStmt):
            try:
                bindings[seg.name] = _eval(seg.expr, root, bindings)
            except OracleError:
                bindings[seg.name] = _FAILED_SET
        else:
            assert isinstance(seg, Output)
            try:
                out.append(_to_text(_eval(seg.expr, root, bindings)))
            except OracleError:
                out.append(UNDEFINED)
    return "".join(out)


def _num(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _eval(expr, root, bindings):
    if isinstance(expr, (IntLit, FloatLit, StrLit)):
        return expr.value
    if isinstance(expr, PathRef):
        node = root
        for seg in expr.path.segments:
            if isinstance(seg, str):
                if not isinstance(node, dict) or seg not in node:
                    raise OracleError
            else:
                if not isinstance(node, list) or not 0 <= seg < len(node):
                    raise OracleError
            node = node[seg]
        return node
    if isinstance(expr, VarRef):
        if expr.name not in bindings or bindings[expr.name] is _FAILED_SET:
            raise OracleError
        return bindings[expr.name]
    if isinstance(expr, Unary):
        operand = _eval(expr.operand, root, bindings)
        if not _num(operand):
            raise OracleError
        return -operand
    if isinstance(expr, Binary):
        left = _eval(expr.left, root, bindings)
        right = _eval(expr.right, root, bindings)
        if not _num(left) or not _num(right):
            raise OracleError
        if expr.op in ("/", "//", "%") and right == 0:
            raise OracleError
        try:
            value = {
                "+": lambda: left + right,
                "-": lambda: left - right,
                "*": lambda: left * right,
                "/": lambda: left / right,
                "//": lambda: left // right,
                "%": lambda: left % right,
            }[expr.op]()
        except OverflowError:
            raise OracleError from None
        if isinstance(value, float) and (value != value or value in (float("inf"), float("-inf"))):
            raise OracleError
        return value
    if isinstance(expr, AttrOp):
        target = _eval(expr.target, root, bindings)
        if not isinstance(target, dict) or expr.key not in target:
            raise OracleError
        return target[expr.key]
    if isinstance(expr, IndexOp):
        target = _eval(expr.target, root, bindings)
        index = _eval(expr.index, root, bindings)
        if isinstance(target, list):
            if not isinstance(index, int) or isinstance(index, bool):
                raise OracleError
            if not 0 <= index < len(target):
                raise OracleError
            return target[index]
        if isinstance(target, dict):
            if not isinstance(index, str) or index not in target:
                raise OracleError
            return target[index]
        raise OracleError
    if isinstance(expr, MethodCall):
        if expr.name not in _METHODS:
            raise OracleError
        target = _eval(expr.target, root, bindings)
        if not isinstance(target, str):
            raise OracleError
        args = [_eval(a, root, bindings) for a in expr.args]
        if any(not isinstance(a, str) for a in args):
            raise OracleError
        if expr.name == "split":
            if len(args) != 1 or args[0] == "":
                raise OracleError
            return target.split(args[0])
        if expr.name == "replace":
            if len(args) != 2:
                raise OracleError
            return target.replace(args[0], args[1])
        if args:
            raise OracleError
        if expr.name == "strip":
            return target.strip()
        if expr.name == "lower":
            return target.lower()
        if expr.name == "upper":
            return target.upper()
        return target.title()
    raise OracleError


def _to_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value.is_integer():
            return str(int(value))
        return repr(value)
    raise OracleError  # None, arrays, and objects have no text form
