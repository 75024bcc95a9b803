"""The symbolic reference language: lexing, parsing, and formatting.

Templates are literal text interleaved with output expressions
``{{ expr }}`` and assignments ``{% set name = expr %}``.  The expression
grammar is deliberately small:

    template := (literal | '{{' expr '}}' | '{% set' IDENT '=' expr '%}')*
    expr     := sum
    sum      := prod (('+' | '-') prod)*
    prod     := unary (('*' | '/' | '//' | '%') unary)*
    unary    := '-'? postfix
    postfix  := primary ('.' IDENT | '[' expr ']' | '.' IDENT '(' args ')')*
    primary  := IDENT | NUMBER | STRING | '(' expr ')'

No loops, no conditionals, no filters.  An identifier chain rooted at the
data-document name (``data`` by default) folds into a single PathRef, so
``data.AMZN['50DayMovingAverage']`` is one static reference; everything
else stays a structural expression.  All source positions are UTF-8 byte
offsets, half-open.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .data import Path
from .errors import ParseError, UnterminatedDelimiter, UnterminatedString

EXPR_OPEN = "{{"
EXPR_CLOSE = "}}"
STMT_OPEN = "{%"
STMT_CLOSE = "%}"

#: String methods the evaluator implements.  Other names still parse as
#: method calls; the renderer reports them as local errors.
METHOD_WHITELIST = frozenset({"split", "strip", "replace", "lower", "upper", "title"})


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceSpan:
    """Half-open byte range into the template source."""

    start: int
    end: int


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class FloatLit:
    value: float


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class PathRef:
    path: Path


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class AttrOp:
    target: "Expr"
    key: str


@dataclass(frozen=True)
class IndexOp:
    target: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class MethodCall:
    target: "Expr"
    name: str
    args: tuple["Expr", ...]


Expr = Union[
    IntLit, FloatLit, StrLit, VarRef, PathRef, Unary, Binary, AttrOp, IndexOp, MethodCall
]


@dataclass(frozen=True)
class Literal:
    """A run of plain text, emitted verbatim."""

    text: str
    span: SourceSpan


@dataclass(frozen=True)
class Output:
    """``{{ expr }}`` — evaluates and renders into the output."""

    expr: Expr
    span: SourceSpan
    expr_source: str


@dataclass(frozen=True)
class SetStmt:
    """``{% set name = expr %}`` — binds a variable, emits nothing."""

    name: str
    expr: Expr
    span: SourceSpan
    expr_source: str


Segment = Union[Literal, Output, SetStmt]


@dataclass(frozen=True)
class TemplateAst:
    source: str
    segments: tuple[Segment, ...]


# --------------------------------------------------------------------------
# Lexer
# --------------------------------------------------------------------------

_TEXT = "text"
_OPEN_EXPR = "open_expr"
_OPEN_STMT = "open_stmt"
_CLOSE_EXPR = "close_expr"
_CLOSE_STMT = "close_stmt"
_IDENT = "ident"
_INT = "int"
_FLOAT = "float"
_STRING = "string"
_OP = "op"
_EOF = "eof"

_PUNCT = {"+", "-", "*", "/", "%", ".", "[", "]", "(", ")", ",", "="}

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"'}


@dataclass(frozen=True)
class Token:
    kind: str
    value: object
    start: int  # byte offset
    end: int  # byte offset
    cstart: int  # code-point offset, for slicing the source str
    cend: int


class _Lexer:
    def __init__(self, source: str):
        self.source = source
        self.n = len(source)
        # byte offset of each code point, plus the total length at the end
        offsets = [0]
        for ch in source:
            offsets.append(offsets[-1] + len(ch.encode("utf-8")))
        self.byte_at = offsets

    def tokens(self) -> Iterator[Token]:
        i = 0
        while i < self.n:
            open_expr = self.source.find(EXPR_OPEN, i)
            open_stmt = self.source.find(STMT_OPEN, i)
            candidates = [p for p in (open_expr, open_stmt) if p >= 0]
            boundary = min(candidates) if candidates else self.n
            if boundary > i:
                yield self._tok(_TEXT, self.source[i:boundary], i, boundary)
                i = boundary
            if i >= self.n:
                break
            if boundary == open_expr:
                yield self._tok(_OPEN_EXPR, EXPR_OPEN, i, i + 2)
                i = yield from self._expr_tokens(i + 2, open_at=i, stmt=False)
            else:
                yield self._tok(_OPEN_STMT, STMT_OPEN, i, i + 2)
                i = yield from self._expr_tokens(i + 2, open_at=i, stmt=True)
        yield self._tok(_EOF, None, self.n, self.n)

    def _expr_tokens(self, i: int, *, open_at: int, stmt: bool):
        src = self.source
        closer = STMT_CLOSE if stmt else EXPR_CLOSE
        close_kind = _CLOSE_STMT if stmt else _CLOSE_EXPR
        while True:
            while i < self.n and src[i] in " \t\r\n":
                i += 1
            if i >= self.n:
                raise UnterminatedDelimiter(
                    f"'{STMT_OPEN if stmt else EXPR_OPEN}' is never closed",
                    position=self.byte_at[open_at],
                )
            if src.startswith(closer, i):
                yield self._tok(close_kind, closer, i, i + 2)
                return i + 2
            ch = src[i]
            if ch.isalpha() or ch == "_":
                j = i + 1
                while j < self.n and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                yield self._tok(_IDENT, src[i:j], i, j)
                i = j
            elif ch.isdigit():
                i = yield from self._number(i)
            elif ch in ("'", '"'):
                i = yield from self._string(i)
            elif ch == "/" and src.startswith("//", i):
                yield self._tok(_OP, "//", i, i + 2)
                i += 2
            elif ch == "%" and not stmt and src.startswith(STMT_CLOSE, i):
                # in stmt mode the closer check above consumes '%}'
                raise ParseError(
                    "'%}' does not close a '{{' block",
                    position=self.byte_at[i],
                )
            elif ch in _PUNCT:
                yield self._tok(_OP, ch, i, i + 1)
                i += 1
            else:
                raise ParseError(
                    f"unexpected character {ch!r} in expression",
                    position=self.byte_at[i],
                )

    def _number(self, i: int):
        src = self.source
        j = i
        while j < self.n and src[j].isdigit():
            j += 1
        is_float = False
        if j < self.n and src[j] == "." and j + 1 < self.n and src[j + 1].isdigit():
            is_float = True
            j += 1
            while j < self.n and src[j].isdigit():
                j += 1
        if j < self.n and src[j] in "eE":
            k = j + 1
            if k < self.n and src[k] in "+-":
                k += 1
            if k < self.n and src[k].isdigit():
                is_float = True
                j = k
                while j < self.n and src[j].isdigit():
                    j += 1
        text = src[i:j]
        if is_float:
            yield self._tok(_FLOAT, float(text), i, j)
        else:
            yield self._tok(_INT, int(text), i, j)
        return j

    def _string(self, i: int):
        src = self.source
        quote = src[i]
        j = i + 1
        buf: list[str] = []
        while j < self.n:
            ch = src[j]
            if ch == quote:
                yield self._tok(_STRING, "".join(buf), i, j + 1)
                return j + 1
            if ch == "\\" and j + 1 < self.n:
                nxt = src[j + 1]
                buf.append(_ESCAPES.get(nxt, nxt))
                j += 2
            else:
                buf.append(ch)
                j += 1
        raise UnterminatedString(
            "string literal is never closed", position=self.byte_at[i]
        )

    def _tok(self, kind: str, value: object, cstart: int, cend: int) -> Token:
        return Token(
            kind=kind,
            value=value,
            start=self.byte_at[cstart],
            end=self.byte_at[cend],
            cstart=cstart,
            cend=cend,
        )


def tokenize(source: str) -> list[Token]:
    """Tokenize a template. Mostly useful for diagnostics and tests."""
    return list(_Lexer(source).tokens())


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str, tokens: list[Token], data_root: str):
        self.source = source
        self.tokens = tokens
        self.pos = 0
        self.data_root = data_root

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, position=tok.start)

    def parse(self) -> TemplateAst:
        segments: list[Segment] = []
        while True:
            tok = self.peek()
            if tok.kind == _EOF:
                break
            if tok.kind == _TEXT:
                self.next()
                segments.append(
                    Literal(text=tok.value, span=SourceSpan(tok.start, tok.end))
                )
            elif tok.kind == _OPEN_EXPR:
                open_tok = self.next()
                first = self.peek()
                expr = self.parse_expr()
                last = self.tokens[self.pos - 1]
                close = self.peek()
                if close.kind != _CLOSE_EXPR:
                    self.fail(
                        f"expected '}}}}' but found {_describe(close)}", close
                    )
                self.next()
                segments.append(
                    Output(
                        expr=expr,
                        span=SourceSpan(open_tok.start, close.end),
                        expr_source=self.source[first.cstart : last.cend],
                    )
                )
            elif tok.kind == _OPEN_STMT:
                segments.append(self.parse_set_stmt())
            else:  # pragma: no cover - lexer only emits the kinds above
                self.fail(f"unexpected {_describe(tok)}", tok)
        return TemplateAst(source=self.source, segments=tuple(segments))

    def parse_set_stmt(self) -> SetStmt:
        open_tok = self.next()
        kw = self.peek()
        if kw.kind != _IDENT or kw.value != "set":
            self.fail(
                f"only 'set' statements are supported, found {_describe(kw)}", kw
            )
        self.next()
        name_tok = self.peek()
        if name_tok.kind != _IDENT:
            if name_tok.kind in (_INT, _FLOAT):
                self.fail(
                    "variable names cannot start with a digit", name_tok
                )
            self.fail(f"expected a variable name, found {_describe(name_tok)}", name_tok)
        self.next()
        eq = self.peek()
        if not (eq.kind == _OP and eq.value == "="):
            self.fail(f"expected '=' after variable name, found {_describe(eq)}", eq)
        self.next()
        first = self.peek()
        expr = self.parse_expr()
        last = self.tokens[self.pos - 1]
        close = self.peek()
        if close.kind == _OP and close.value == "=":
            self.fail("chained assignment is not supported", close)
        if close.kind != _CLOSE_STMT:
            self.fail(f"expected '%}}' but found {_describe(close)}", close)
        self.next()
        return SetStmt(
            name=name_tok.value,
            expr=expr,
            span=SourceSpan(open_tok.start, close.end),
            expr_source=self.source[first.cstart : last.cend],
        )

    # ---- expressions ----

    def parse_expr(self) -> Expr:
        return self.parse_sum()

    def parse_sum(self) -> Expr:
        left = self.parse_prod()
        while self._at_op("+", "-"):
            op = self.next().value
            left = Binary(op=op, left=left, right=self.parse_prod())
        return left

    def parse_prod(self) -> Expr:
        left = self.parse_unary()
        while self._at_op("*", "/", "//", "%"):
            op = self.next().value
            left = Binary(op=op, left=left, right=self.parse_unary())
        return left

    def parse_unary(self) -> Expr:
        if self._at_op("-"):
            self.next()
            return Unary(op="-", operand=self.parse_postfix())
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        node = self.parse_primary()
        while True:
            if self._at_op("."):
                self.next()
                name_tok = self.peek()
                if name_tok.kind != _IDENT:
                    if name_tok.kind in (_INT, _FLOAT):
                        self.fail(
                            "expected identifier after '.' "
                            "(identifiers cannot start with a digit)",
                            name_tok,
                        )
                    self.fail(
                        f"expected identifier after '.', found {_describe(name_tok)}",
                        name_tok,
                    )
                self.next()
                if self._at_op("("):
                    args = self.parse_args()
                    node = MethodCall(target=node, name=name_tok.value, args=args)
                elif isinstance(node, PathRef):
                    node = PathRef(node.path.child(name_tok.value))
                else:
                    node = AttrOp(target=node, key=name_tok.value)
            elif self._at_op("["):
                self.next()
                index = self.parse_expr()
                close = self.peek()
                if not (close.kind == _OP and close.value == "]"):
                    self.fail(f"expected ']', found {_describe(close)}", close)
                self.next()
                if isinstance(node, PathRef) and isinstance(index, IntLit):
                    node = PathRef(node.path.child(index.value))
                elif isinstance(node, PathRef) and isinstance(index, StrLit):
                    node = PathRef(node.path.child(index.value))
                else:
                    node = IndexOp(target=node, index=index)
            else:
                return node

    def parse_args(self) -> tuple[Expr, ...]:
        self.next()  # consume '('
        args: list[Expr] = []
        if self._at_op(")"):
            self.next()
            return ()
        while True:
            args.append(self.parse_expr())
            tok = self.peek()
            if tok.kind == _OP and tok.value == ",":
                self.next()
                continue
            if tok.kind == _OP and tok.value == ")":
                self.next()
                return tuple(args)
            self.fail(f"expected ',' or ')', found {_describe(tok)}", tok)

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == _IDENT:
            self.next()
            if tok.value == self.data_root:
                return PathRef(Path((tok.value,)))
            return VarRef(name=tok.value)
        if tok.kind == _INT:
            self.next()
            return IntLit(value=tok.value)
        if tok.kind == _FLOAT:
            self.next()
            return FloatLit(value=tok.value)
        if tok.kind == _STRING:
            self.next()
            return StrLit(value=tok.value)
        if tok.kind == _OP and tok.value == "(":
            self.next()
            inner = self.parse_expr()
            close = self.peek()
            if not (close.kind == _OP and close.value == ")"):
                self.fail(f"expected ')', found {_describe(close)}", close)
            self.next()
            # parentheses only shape the tree; no node survives them, which
            # keeps parse(format(parse(t))) == parse(t) with minimal parens
            return inner
        self.fail(f"expected an expression, found {_describe(tok)}", tok)

    def _at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == _OP and tok.value in ops


def _describe(tok: Token) -> str:
    if tok.kind == _EOF:
        return "end of input"
    if tok.kind == _TEXT:
        return "literal text"
    return repr(tok.value)


def parse_template(source: str, *, data_root: str = "data") -> TemplateAst:
    """Parse template text into an AST.

    Raises :class:`ParseError` (or a subclass) on any malformed input; one
    parse failure is what the renderer treats as a *global* error.
    """
    tokens = tokenize(source)
    return _Parser(source, tokens, data_root).parse()


# --------------------------------------------------------------------------
# Canonical formatter
# --------------------------------------------------------------------------

_PREC_SUM = 1
_PREC_PROD = 2
_PREC_UNARY = 3
_PREC_POSTFIX = 4
_PREC_ATOM = 5


def _prec(expr: Expr) -> int:
    if isinstance(expr, Binary):
        return _PREC_SUM if expr.op in ("+", "-") else _PREC_PROD
    if isinstance(expr, Unary):
        return _PREC_UNARY
    if isinstance(expr, (AttrOp, IndexOp, MethodCall)):
        return _PREC_POSTFIX
    return _PREC_ATOM


def format_expr(expr: Expr) -> str:
    """Render an expression with canonical spacing and minimal parentheses."""
    if isinstance(expr, IntLit):
        return str(expr.value)
    if isinstance(expr, FloatLit):
        return repr(expr.value)
    if isinstance(expr, StrLit):
        return _quote(expr.value)
    if isinstance(expr, VarRef):
        return expr.name
    if isinstance(expr, PathRef):
        return expr.path.text()
    if isinstance(expr, Unary):
        return "-" + _wrap(expr.operand, _prec(expr.operand) < _PREC_POSTFIX)
    if isinstance(expr, Binary):
        mine = _prec(expr)
        left = _wrap(expr.left, _prec(expr.left) < mine)
        right = _wrap(expr.right, _prec(expr.right) <= mine)
        return f"{left} {expr.op} {right}"
    if isinstance(expr, AttrOp):
        return _wrap(expr.target, _prec(expr.target) < _PREC_POSTFIX) + f".{expr.key}"
    if isinstance(expr, IndexOp):
        target = _wrap(expr.target, _prec(expr.target) < _PREC_POSTFIX)
        return f"{target}[{format_expr(expr.index)}]"
    if isinstance(expr, MethodCall):
        target = _wrap(expr.target, _prec(expr.target) < _PREC_POSTFIX)
        args = ", ".join(format_expr(a) for a in expr.args)
        return f"{target}.{expr.name}({args})"
    raise TypeError(f"not an expression: {expr!r}")


def _wrap(expr: Expr, parenthesize: bool) -> str:
    text = format_expr(expr)
    return f"({text})" if parenthesize else text


def _quote(value: str) -> str:
    escaped = (
        value.replace("\\", "\\\\")
        .replace("'", "\\'")
        .replace("\n", "\\n")
        .replace("\t", "\\t")
        .replace("\r", "\\r")
    )
    return f"'{escaped}'"


def format_template(ast: TemplateAst) -> str:
    """Format an AST back to text: one space inside delimiters, canonical
    operator spacing.  Literal text passes through byte-for-byte."""
    pieces: list[str] = []
    for segment in ast.segments:
        if isinstance(segment, Literal):
            pieces.append(segment.text)
        elif isinstance(segment, Output):
            pieces.append(f"{{{{ {format_expr(segment.expr)} }}}}")
        else:
            pieces.append(
                f"{{% set {segment.name} = {format_expr(segment.expr)} %}}"
            )
    return "".join(pieces)


# --------------------------------------------------------------------------
# Static reference analysis
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentRefs:
    """Static references of one non-literal segment."""

    index: int
    paths: tuple[Path, ...]
    var_reads: tuple[str, ...]
    assigns: str | None
    unbound: tuple[str, ...]


@dataclass(frozen=True)
class ReferenceReport:
    paths: tuple[Path, ...]
    var_reads: tuple[str, ...]
    assignments: tuple[str, ...]
    unbound: tuple[tuple[str, int], ...]  # (name, segment index)
    per_segment: tuple[SegmentRefs, ...]


def expr_references(expr: Expr) -> tuple[tuple[Path, ...], tuple[str, ...]]:
    """All static paths and variable reads inside one expression."""
    paths: dict[Path, None] = {}
    names: dict[str, None] = {}

    def walk(node: Expr):
        if isinstance(node, PathRef):
            paths.setdefault(node.path)
        elif isinstance(node, VarRef):
            names.setdefault(node.name)
        elif isinstance(node, Unary):
            walk(node.operand)
        elif isinstance(node, Binary):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, AttrOp):
            walk(node.target)
        elif isinstance(node, IndexOp):
            walk(node.target)
            walk(node.index)
        elif isinstance(node, MethodCall):
            walk(node.target)
            for arg in node.args:
                walk(arg)

    walk(expr)
    return tuple(paths), tuple(names)


def collect_references(ast: TemplateAst) -> ReferenceReport:
    """Gather every path reference, variable read/assignment, and any read
    of a variable that no earlier segment assigned."""
    all_paths: dict[Path, None] = {}
    all_reads: dict[str, None] = {}
    assignments: dict[str, None] = {}
    unbound: list[tuple[str, int]] = []
    per_segment: list[SegmentRefs] = []

    bound: set[str] = set()
    for i, segment in enumerate(ast.segments):
        if isinstance(segment, Literal):
            continue
        paths, reads = expr_references(segment.expr)
        missing = tuple(name for name in reads if name not in bound)
        for path in paths:
            all_paths.setdefault(path)
        for name in reads:
            all_reads.setdefault(name)
        unbound.extend((name, i) for name in missing)
        assigns = None
        if isinstance(segment, SetStmt):
            assigns = segment.name
            assignments.setdefault(segment.name)
            bound.add(segment.name)
        per_segment.append(
            SegmentRefs(
                index=i,
                paths=paths,
                var_reads=reads,
                assigns=assigns,
                unbound=missing,
            )
        )
    return ReferenceReport(
        paths=tuple(all_paths),
        var_reads=tuple(all_reads),
        assignments=tuple(assignments),
        unbound=tuple(unbound),
        per_segment=tuple(per_segment),
    )
