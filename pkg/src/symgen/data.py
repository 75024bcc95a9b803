"""Document model: JSON value trees, paths, and ingestion helpers.

Values are plain Python objects mirroring JSON exactly: None, bool, int,
float, str, list, dict.  Ints and floats stay distinct (``95`` is an int,
``44.0`` a float), object key order is preserved, and ints must fit in a
signed 64-bit range at the document boundary.
"""

from __future__ import annotations

import json
import math
import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .errors import (
    DocumentTooLarge,
    DuplicateSlug,
    IndexOutOfBounds,
    MalformedInput,
    MissingDataKey,
    MissingKey,
    MissingKeyField,
    TypeMismatch,
)

Value = Union[None, bool, int, float, str, list, dict]
Segment = Union[str, int]  # object key or array index

INT64_MIN = -(2 ** 63)
INT64_MAX = 2 ** 63 - 1

#: Documents larger than this many bytes are rejected by default.
DEFAULT_MAX_DOCUMENT_BYTES = 16 * 1024 * 1024

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_INT_STR_RE = re.compile(r"[+-]?[0-9]+\Z")
_FLOAT_STR_RE = re.compile(r"[+-]?(?:[0-9]+\.[0-9]*|\.[0-9]+|[0-9]+)(?:[eE][+-]?[0-9]+)?\Z")


@dataclass(frozen=True)
class Path:
    """A sequence of lookups into a document: object keys and array indices."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a path needs at least one segment")
        if not isinstance(self.segments[0], str):
            raise ValueError("a path must start with an object key")
        for seg in self.segments:
            if isinstance(seg, bool) or not isinstance(seg, (str, int)):
                raise ValueError(f"bad path segment: {seg!r}")
            if isinstance(seg, int) and seg < 0:
                raise ValueError(f"array index must be >= 0, got {seg}")

    def child(self, segment: Segment) -> "Path":
        return Path(self.segments + (segment,))

    def text(self) -> str:
        """Canonical text form: dotted identifier keys, brackets otherwise."""
        parts = []
        for i, seg in enumerate(self.segments):
            if isinstance(seg, int):
                parts.append(f"[{seg}]")
            elif _IDENT_RE.match(seg):
                parts.append(seg if i == 0 else f".{seg}")
            else:
                escaped = seg.replace("\\", "\\\\").replace("'", "\\'")
                parts.append(f"['{escaped}']")
        return "".join(parts)

    def __str__(self) -> str:
        return self.text()


def parse_path_text(text: str) -> Path:
    """Parse the canonical path form produced by :meth:`Path.text`."""
    segments: list[Segment] = []
    i, n = 0, len(text)
    end = _ident_end(text, 0)
    if end == 0:
        raise MalformedInput(f"path must start with an identifier: {text!r}")
    segments.append(text[:end])
    i = end
    while i < n:
        ch = text[i]
        if ch == ".":
            end = _ident_end(text, i + 1)
            if end == i + 1:
                raise MalformedInput(f"expected identifier after '.' in path {text!r}")
            segments.append(text[i + 1 : end])
            i = end
        elif ch == "[":
            if i + 1 < n and text[i + 1] == "'":
                j = i + 2
                buf = []
                while j < n and text[j] != "'":
                    if text[j] == "\\" and j + 1 < n:
                        buf.append(text[j + 1])
                        j += 2
                    else:
                        buf.append(text[j])
                        j += 1
                if j >= n or j + 1 >= n or text[j + 1] != "]":
                    raise MalformedInput(f"unterminated bracket segment in path {text!r}")
                segments.append("".join(buf))
                i = j + 2
            else:
                j = text.find("]", i)
                if j < 0:
                    raise MalformedInput(f"unterminated bracket segment in path {text!r}")
                digits = text[i + 1 : j]
                if not digits.isdigit():
                    raise MalformedInput(f"bad index {digits!r} in path {text!r}")
                segments.append(int(digits))
                i = j + 1
        else:
            raise MalformedInput(f"unexpected {ch!r} in path {text!r}")
    return Path(tuple(segments))


def _ident_end(text: str, start: int) -> int:
    i = start
    if i < len(text) and (text[i].isalpha() or text[i] == "_"):
        i += 1
        while i < len(text) and (text[i].isalnum() or text[i] == "_"):
            i += 1
    return i


@dataclass(frozen=True)
class DataDocument:
    """A parsed document. The root object always carries a ``data`` key."""

    root: dict
    source_id: str | None = None


def load_document(
    data: bytes | str | dict,
    *,
    source_id: str | None = None,
    max_bytes: int = DEFAULT_MAX_DOCUMENT_BYTES,
) -> DataDocument:
    """Parse and validate a document from JSON bytes/text or a parsed dict.

    Rejects documents over ``max_bytes``, duplicate object keys, non-finite
    numbers, and ints outside the signed 64-bit range; requires a top-level
    ``data`` key.
    """
    if isinstance(data, (bytes, str)):
        raw = data.encode("utf-8") if isinstance(data, str) else data
        if len(raw) > max_bytes:
            raise DocumentTooLarge(
                f"document is {len(raw)} bytes, limit is {max_bytes}"
            )
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedInput(f"document is not valid UTF-8: {exc}") from None
        try:
            root = json.loads(
                text,
                object_pairs_hook=_reject_duplicate_keys,
                parse_int=_parse_int64,
                parse_constant=_reject_constant,
            )
        except MalformedInput:
            raise
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"invalid JSON: {exc}") from None
    elif isinstance(data, dict):
        root = data
        _validate_value(root)
    else:
        raise MalformedInput(f"cannot load a document from {type(data).__name__}")

    if not isinstance(root, dict):
        raise MalformedInput("document root must be a JSON object")
    if "data" not in root:
        raise MissingDataKey("document root has no 'data' key")
    return DataDocument(root=root, source_id=source_id)


def _reject_duplicate_keys(pairs):
    obj = {}
    for key, value in pairs:
        if key in obj:
            raise MalformedInput(f"duplicate object key: {key!r}")
        obj[key] = value
    return obj


def _parse_int64(literal: str) -> int:
    value = int(literal)
    if not INT64_MIN <= value <= INT64_MAX:
        raise MalformedInput(f"integer out of 64-bit range: {literal}")
    return value


def _reject_constant(name: str):
    raise MalformedInput(f"non-finite number literal: {name}")


def _validate_value(value: Value) -> None:
    """Check an in-memory tree against the value model (64-bit ints, JSON kinds)."""
    if value is None or isinstance(value, (bool, str)):
        return
    if isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise MalformedInput(f"integer out of 64-bit range: {value}")
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise MalformedInput(f"non-finite number: {value!r}")
        return
    if isinstance(value, list):
        for item in value:
            _validate_value(item)
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise MalformedInput(f"object key must be a string: {key!r}")
            _validate_value(item)
        return
    raise MalformedInput(f"unsupported value type: {type(value).__name__}")


def serialize_document(doc: DataDocument, *, indent: int | None = 2) -> str:
    """Serialize back to JSON text. Round-trips through :func:`load_document`."""
    return json.dumps(doc.root, indent=indent, ensure_ascii=False)


def resolve_path(doc: DataDocument, path: Path) -> Value:
    """Walk ``path`` from the document root.

    Failures identify the longest prefix that did resolve, so callers can
    report "data.box_score resolved, 'fgm' missing" style diagnostics.
    """
    current: Value = doc.root
    consumed: list[Segment] = []
    for seg in path.segments:
        if isinstance(seg, str):
            if not isinstance(current, dict):
                raise TypeMismatch(
                    f"cannot look up key {seg!r} in {kind_name(current)}"
                    f"{_at(consumed)}",
                    path=path,
                    resolved_prefix=consumed,
                )
            if seg not in current:
                raise MissingKey(
                    f"key {seg!r} not found{_at(consumed)}",
                    path=path,
                    resolved_prefix=consumed,
                )
            current = current[seg]
        else:
            if not isinstance(current, list):
                raise TypeMismatch(
                    f"cannot index into {kind_name(current)}{_at(consumed)}",
                    path=path,
                    resolved_prefix=consumed,
                )
            if not 0 <= seg < len(current):
                raise IndexOutOfBounds(
                    f"index {seg} out of bounds for array of length "
                    f"{len(current)}{_at(consumed)}",
                    path=path,
                    resolved_prefix=consumed,
                )
            current = current[seg]
        consumed.append(seg)
    return current


def _at(consumed: list[Segment]) -> str:
    if not consumed:
        return " at document root"
    return f" after resolving {Path(tuple(consumed)).text()}"


def kind_name(value: Value) -> str:
    """Human-readable kind of a value, for error messages."""
    if value is None:
        return "Null"
    if isinstance(value, bool):
        return "Bool"
    if isinstance(value, int):
        return "Int"
    if isinstance(value, float):
        return "Float"
    if isinstance(value, str):
        return "Str"
    if isinstance(value, list):
        return "Array"
    return "Object"


# --------------------------------------------------------------------------
# Slugs and record keying
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SlugRules:
    """How record key fields become object keys."""

    nfc_normalize: bool = True
    lowercase: bool = True
    whitespace_replacement: str = "_"

    def apply(self, text: str) -> str:
        s = unicodedata.normalize("NFC", text) if self.nfc_normalize else text
        if self.lowercase:
            s = s.lower()
        s = re.sub(r"\s+", self.whitespace_replacement, s)
        return re.sub(r"[^a-z0-9_]", "", s)


DEFAULT_SLUG_RULES = SlugRules()


def slugify(text: str, rules: SlugRules = DEFAULT_SLUG_RULES) -> str:
    return rules.apply(text)


def keyify_records(
    doc: DataDocument,
    array_path: Path,
    key_field: str,
    rules: SlugRules = DEFAULT_SLUG_RULES,
) -> DataDocument:
    """Replace an array of records with an object keyed by a slugged field.

    Record order is preserved, records keep all their fields (including the
    key field), and slug collisions are an error rather than silent loss.
    """
    array = resolve_path(doc, array_path)
    if not isinstance(array, list):
        raise TypeMismatch(
            f"{array_path.text()} is {kind_name(array)}, expected Array",
            path=array_path,
            resolved_prefix=array_path.segments,
        )
    keyed: dict[str, Value] = {}
    for i, record in enumerate(array):
        if not isinstance(record, dict) or key_field not in record:
            raise MissingKeyField(
                f"record {i} under {array_path.text()} has no {key_field!r} field"
            )
        raw_key = record[key_field]
        if not isinstance(raw_key, str):
            raise MissingKeyField(
                f"record {i} under {array_path.text()}: {key_field!r} is "
                f"{kind_name(raw_key)}, expected Str"
            )
        slug = rules.apply(raw_key)
        if slug in keyed:
            raise DuplicateSlug(
                f"records {raw_key!r} collide on slug {slug!r} under "
                f"{array_path.text()}"
            )
        keyed[slug] = record
    return DataDocument(
        root=_replace_at(doc.root, array_path.segments, keyed),
        source_id=doc.source_id,
    )


def _replace_at(node: Value, segments: tuple[Segment, ...], new_value: Value) -> Value:
    if not segments:
        return new_value
    head, rest = segments[0], segments[1:]
    if isinstance(head, str):
        assert isinstance(node, dict)
        copied = dict(node)
        copied[head] = _replace_at(node[head], rest, new_value)
        return copied
    assert isinstance(node, list)
    copied_list = list(node)
    copied_list[head] = _replace_at(node[head], rest, new_value)
    return copied_list


# --------------------------------------------------------------------------
# Numeric coercion
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoercionIssue:
    """A listed field whose string value could not become a number."""

    path: Path
    field: str
    value: str


def coerce_numeric_fields(
    doc: DataDocument, numeric_fields: Iterable[str]
) -> tuple[DataDocument, list[CoercionIssue]]:
    """Convert string-typed numeric fields to Int/Float wherever they occur.

    ``"None"`` becomes Null; unparseable values are reported and left as
    strings.  Already-numeric values pass through, so the operation is
    idempotent.
    """
    fields = frozenset(numeric_fields)
    issues: list[CoercionIssue] = []

    def walk(value: Value, segments: tuple[Segment, ...]) -> Value:
        if isinstance(value, dict):
            out = {}
            for key, item in value.items():
                here = segments + (key,)
                if key in fields and isinstance(item, str):
                    out[key] = convert(item, key, here)
                else:
                    out[key] = walk(item, here)
            return out
        if isinstance(value, list):
            return [walk(item, segments + (i,)) for i, item in enumerate(value)]
        return value

    def convert(text: str, key: str, segments: tuple[Segment, ...]) -> Value:
        if text == "None":
            return None
        if _INT_STR_RE.match(text):
            value = int(text)
            if INT64_MIN <= value <= INT64_MAX:
                return value
        elif _FLOAT_STR_RE.match(text):
            return float(text)
        issues.append(CoercionIssue(path=Path(segments), field=key, value=text))
        return text

    new_root = walk(doc.root, ())
    return DataDocument(root=new_root, source_id=doc.source_id), issues


def iter_paths(doc: DataDocument) -> Iterator[tuple[Path, Value]]:
    """Yield every (path, leaf-or-node value) pair under the root, depth-first."""

    def walk(value: Value, segments: tuple[Segment, ...]):
        if segments:
            yield Path(segments), value
        if isinstance(value, dict):
            for key, item in value.items():
                yield from walk(item, segments + (key,))
        elif isinstance(value, list):
            for i, item in enumerate(value):
                yield from walk(item, segments + (i,))

    yield from walk(doc.root, ())
