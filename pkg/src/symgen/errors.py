"""Exception hierarchy shared across the package.

Every error raised by symgen code derives from SymgenError so callers can
catch the whole family at an API boundary without swallowing unrelated bugs.
"""

from __future__ import annotations


class SymgenError(Exception):
    """Base class for all symgen errors."""


# --------------------------------------------------------------------------
# Data layer
# --------------------------------------------------------------------------

class MalformedInput(SymgenError):
    """Input bytes are not a valid document (bad JSON, duplicate keys, ...)."""


class DocumentTooLarge(MalformedInput):
    """Document exceeds the configured byte limit."""


class MissingDataKey(SymgenError):
    """Document root has no top-level ``data`` key."""


class PathResolutionError(SymgenError):
    """A path could not be fully resolved against a document.

    ``path`` is the requested path; ``resolved_prefix`` holds the segments
    that did resolve (possibly empty), which is what diagnostics report.
    """

    def __init__(self, message: str, *, path=None, resolved_prefix=()):
        super().__init__(message)
        self.path = path
        self.resolved_prefix = tuple(resolved_prefix)


class MissingKey(PathResolutionError):
    """An object lookup failed: the key is absent."""


class IndexOutOfBounds(PathResolutionError):
    """An array index is outside [0, len)."""


class TypeMismatch(PathResolutionError):
    """A value has the wrong kind for the requested operation."""


class DuplicateSlug(SymgenError):
    """Two records produced the same key after slugification."""


class MissingKeyField(SymgenError):
    """A record lacks the field that should become its key."""


# --------------------------------------------------------------------------
# Template language
# --------------------------------------------------------------------------

class ParseError(SymgenError):
    """Template text does not conform to the reference grammar.

    ``position`` is a UTF-8 byte offset into the source text.
    """

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message)
        self.position = position


class UnterminatedDelimiter(ParseError):
    """An opening ``{{`` or ``{%`` has no matching closer."""


class UnterminatedString(ParseError):
    """A string literal is missing its closing quote."""


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------

#: Closed set of evaluation failure causes, as serialized into provenance.
EVAL_CAUSES = frozenset({
    "missing_key",
    "index_out_of_bounds",
    "type_mismatch",
    "division_by_zero",
    "unknown_method",
    "bad_argument",
    "unbound_variable",
})

#: Render-level causes that are not evaluation failures proper: a Null value
#: reaching output position, which the policy turns into undefined text.
RENDER_CAUSES = EVAL_CAUSES | {"null_value"}


class EvalError(SymgenError):
    """An expression failed to evaluate; becomes a *local* render error."""

    def __init__(self, cause: str, message: str, *, path=None):
        if cause not in EVAL_CAUSES:
            raise ValueError(f"unknown eval cause: {cause!r}")
        super().__init__(message)
        self.cause = cause
        self.path = path


# --------------------------------------------------------------------------
# Generation
# --------------------------------------------------------------------------

class ShotShapeMismatch(SymgenError):
    """A strategy needs shot turns the task asset does not provide."""


class TransportError(SymgenError):
    """The completion endpoint could not be reached or answered garbage."""


class RateLimited(TransportError):
    """Retries exhausted against a rate-limiting endpoint."""


class ContextOverflow(TransportError):
    """The prompt exceeds the model's context window (not retryable)."""


# --------------------------------------------------------------------------
# Datasets
# --------------------------------------------------------------------------

class SchemaDrift(SymgenError):
    """A fetched payload is missing its expected shape."""


class MalformedFixture(SymgenError):
    """A bundled or user-supplied fixture violates its contract."""


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

class EmptyCandidate(SymgenError):
    """A text metric was asked to score an empty candidate."""


class MixedStrategies(SymgenError):
    """Records from incompatible strategies were mixed in one computation."""
