/**
 * Bundle loading and validation.
 *
 * A bundle arrives as up to three JSON files — provenance.json (required),
 * data.json (required), meta.json (optional) — and is checked structurally
 * before anything renders: wrong schema version, missing fields, stray
 * fields, or offsets that don't line up with the text all reject the whole
 * bundle. The viewer never shows a partially valid one.
 */

import { ByteIndex, utf8Length } from "./bytes.js";
import type {
  Bundle,
  GlobalError,
  Graph,
  GraphEdge,
  GraphNode,
  JsonValue,
  LocalError,
  Provenance,
  Span,
} from "./types.js";
import { SCHEMA_VERSION } from "./types.js";

export class BundleError extends Error {}

const ERROR_CAUSES = new Set([
  "missing_key",
  "index_out_of_bounds",
  "type_mismatch",
  "bad_argument",
  "division_by_zero",
  "unknown_method",
  "unbound_variable",
  "null_value",
]);

// --- Low-level checks -------------------------------------------------------

function fail(where: string, detail: string): never {
  throw new BundleError(`${where}: ${detail}`);
}

function asRecord(value: unknown, where: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(where, "expected a JSON object");
  }
  return value as Record<string, unknown>;
}

function checkKeys(obj: Record<string, unknown>, where: string, required: string[]): void {
  for (const key of required) {
    if (!(key in obj)) fail(where, `missing field "${key}"`);
  }
  for (const key of Object.keys(obj)) {
    if (!required.includes(key)) fail(where, `unknown field "${key}"`);
  }
}

function asString(value: unknown, where: string): string {
  if (typeof value !== "string") fail(where, "expected a string");
  return value;
}

function asInt(value: unknown, where: string): number {
  if (typeof value !== "number" || !Number.isInteger(value)) fail(where, "expected an integer");
  return value;
}

function asBool(value: unknown, where: string): boolean {
  if (typeof value !== "boolean") fail(where, "expected a boolean");
  return value;
}

function asArray(value: unknown, where: string): unknown[] {
  if (!Array.isArray(value)) fail(where, "expected an array");
  return value;
}

function asStringArray(value: unknown, where: string): string[] {
  return asArray(value, where).map((item, i) => asString(item, `${where}[${i}]`));
}

// --- Section parsers ---------------------------------------------------------

function parseSpan(value: unknown, where: string): Span {
  const obj = asRecord(value, where);
  checkKeys(obj, where, [
    "start",
    "end",
    "expr_source",
    "referenced_paths",
    "referenced_vars",
    "value_rendered",
    "status",
  ]);
  const status = asString(obj.status, `${where}.status`);
  if (status !== "ok" && status !== "undefined") {
    fail(`${where}.status`, `expected "ok" or "undefined", got "${status}"`);
  }
  return {
    start: asInt(obj.start, `${where}.start`),
    end: asInt(obj.end, `${where}.end`),
    expr_source: asString(obj.expr_source, `${where}.expr_source`),
    referenced_paths: asStringArray(obj.referenced_paths, `${where}.referenced_paths`),
    referenced_vars: asStringArray(obj.referenced_vars, `${where}.referenced_vars`),
    value_rendered: asString(obj.value_rendered, `${where}.value_rendered`),
    status,
  };
}

function parseLocalError(value: unknown, where: string): LocalError {
  const obj = asRecord(value, where);
  checkKeys(obj, where, ["expr_source", "cause", "start", "end"]);
  const cause = asString(obj.cause, `${where}.cause`);
  if (!ERROR_CAUSES.has(cause)) fail(`${where}.cause`, `unknown cause "${cause}"`);
  return {
    expr_source: asString(obj.expr_source, `${where}.expr_source`),
    cause,
    start: asInt(obj.start, `${where}.start`),
    end: asInt(obj.end, `${where}.end`),
  };
}

function parseGlobalError(value: unknown, where: string): GlobalError | null {
  if (value === null) return null;
  const obj = asRecord(value, where);
  checkKeys(obj, where, ["message", "position"]);
  const position = obj.position === null ? null : asInt(obj.position, `${where}.position`);
  return { message: asString(obj.message, `${where}.message`), position: position as number };
}

function parseNode(value: unknown, where: string): GraphNode {
  const obj = asRecord(value, where);
  checkKeys(obj, where, ["id", "kind", "expr_source", "ok", "value", "var", "version", "span_index"]);
  const kind = asString(obj.kind, `${where}.kind`);
  if (kind !== "set" && kind !== "output") fail(`${where}.kind`, `unknown kind "${kind}"`);
  return {
    id: asString(obj.id, `${where}.id`),
    kind,
    expr_source: asString(obj.expr_source, `${where}.expr_source`),
    ok: asBool(obj.ok, `${where}.ok`),
    value: obj.value,
    var: obj.var === null ? null : asString(obj.var, `${where}.var`),
    version: obj.version === null ? null : asInt(obj.version, `${where}.version`),
    span_index: obj.span_index === null ? null : asInt(obj.span_index, `${where}.span_index`),
  };
}

function parseEdge(value: unknown, where: string): GraphEdge {
  const obj = asRecord(value, where);
  checkKeys(obj, where, ["from", "to", "kind"]);
  const kind = asString(obj.kind, `${where}.kind`);
  if (kind !== "var" && kind !== "path") fail(`${where}.kind`, `unknown kind "${kind}"`);
  return {
    from: asString(obj.from, `${where}.from`),
    to: asString(obj.to, `${where}.to`),
    kind,
  };
}

function parseGraph(value: unknown, where: string): Graph {
  const obj = asRecord(value, where);
  checkKeys(obj, where, ["nodes", "edges"]);
  return {
    nodes: asArray(obj.nodes, `${where}.nodes`).map((n, i) => parseNode(n, `${where}.nodes[${i}]`)),
    edges: asArray(obj.edges, `${where}.edges`).map((e, i) => parseEdge(e, `${where}.edges[${i}]`)),
  };
}

// --- Cross-field consistency ------------------------------------------------

function checkOffsets(prov: Provenance): void {
  const index = new ByteIndex(prov.text);
  const byteLen = index.byteLength;
  let prevEnd = 0;
  prov.spans.forEach((span, i) => {
    const where = `spans[${i}]`;
    if (span.start > span.end) fail(where, `start ${span.start} > end ${span.end}`);
    if (span.end > byteLen) fail(where, `end ${span.end} beyond text (${byteLen} bytes)`);
    if (span.start < prevEnd) fail(where, `overlaps previous span (starts at ${span.start})`);
    try {
      // Both offsets must cut cleanly between characters.
      index.charIndexAt(span.start);
      index.charIndexAt(span.end);
    } catch {
      fail(where, "offset is not on a character boundary");
    }
    prevEnd = span.end;
  });
  prov.local_errors.forEach((err, i) => {
    const where = `local_errors[${i}]`;
    if (err.start > err.end) fail(where, `start ${err.start} > end ${err.end}`);
    if (err.end > byteLen) fail(where, `end ${err.end} beyond text (${byteLen} bytes)`);
  });
}

function checkGraph(prov: Provenance): void {
  const ids = new Set<string>();
  prov.graph.nodes.forEach((node, i) => {
    const where = `graph.nodes[${i}]`;
    if (ids.has(node.id)) fail(where, `duplicate node id "${node.id}"`);
    ids.add(node.id);
    if (node.span_index !== null) {
      if (node.kind !== "output") fail(where, "span_index on a non-output node");
      if (node.span_index < 0 || node.span_index >= prov.spans.length) {
        fail(where, `span_index ${node.span_index} out of range`);
      }
    }
  });
  prov.graph.edges.forEach((edge, i) => {
    const where = `graph.edges[${i}]`;
    if (!ids.has(edge.from)) fail(where, `edge from unknown node "${edge.from}"`);
    if (edge.kind === "var" && !ids.has(edge.to)) {
      fail(where, `var edge to unknown node "${edge.to}"`);
    }
  });
}

// --- Public API ---------------------------------------------------------------

/** Validate a parsed provenance.json value. Throws BundleError on any defect. */
export function parseProvenance(value: unknown): Provenance {
  const obj = asRecord(value, "provenance");
  checkKeys(obj, "provenance", [
    "schema_version",
    "text",
    "spans",
    "local_errors",
    "global_error",
    "graph",
  ]);
  const version = asString(obj.schema_version, "schema_version");
  if (version !== SCHEMA_VERSION) {
    fail("schema_version", `expected "${SCHEMA_VERSION}", got "${version}"`);
  }
  const prov: Provenance = {
    schema_version: version,
    text: asString(obj.text, "text"),
    spans: asArray(obj.spans, "spans").map((s, i) => parseSpan(s, `spans[${i}]`)),
    local_errors: asArray(obj.local_errors, "local_errors").map((e, i) =>
      parseLocalError(e, `local_errors[${i}]`),
    ),
    global_error: parseGlobalError(obj.global_error, "global_error"),
    graph: parseGraph(obj.graph, "graph"),
  };
  checkOffsets(prov);
  checkGraph(prov);
  return prov;
}

export interface BundleInput {
  provenance: unknown;
  document: unknown;
  meta?: unknown;
}

/** Assemble and validate a bundle from already-parsed JSON values. */
export function parseBundle(input: BundleInput): Bundle {
  const provenance = parseProvenance(input.provenance);
  const document = asRecord(input.document, "data") as { [key: string]: JsonValue };
  let meta: { [key: string]: JsonValue } | null = null;
  let id = "(unnamed bundle)";
  if (input.meta !== undefined) {
    meta = asRecord(input.meta, "meta") as { [key: string]: JsonValue };
    if (typeof meta.id === "string" && meta.id !== "") id = meta.id;
  }
  return { id, provenance, document, meta };
}

/**
 * Build a bundle from raw file contents, routing by file name. Extra files
 * (an index.json, say) are ignored; duplicates and missing required files
 * are rejected so a whole export directory can't silently load as one bundle.
 */
export function bundleFromFiles(files: { name: string; text: string }[]): Bundle {
  const found = new Map<string, string>();
  for (const file of files) {
    const base = file.name.split("/").pop() ?? file.name;
    if (base !== "provenance.json" && base !== "data.json" && base !== "meta.json") continue;
    if (found.has(base)) {
      throw new BundleError(`more than one ${base} selected — load a single bundle at a time`);
    }
    found.set(base, file.text);
  }
  const provText = found.get("provenance.json");
  if (provText === undefined) throw new BundleError("no provenance.json among the selected files");
  const dataText = found.get("data.json");
  if (dataText === undefined) throw new BundleError("no data.json among the selected files");

  function parse(name: string, text: string): unknown {
    try {
      return JSON.parse(text);
    } catch (exc) {
      throw new BundleError(`${name} is not valid JSON: ${(exc as Error).message}`);
    }
  }

  const metaText = found.get("meta.json");
  return parseBundle({
    provenance: parse("provenance.json", provText),
    document: parse("data.json", dataText),
    meta: metaText === undefined ? undefined : parse("meta.json", metaText),
  });
}

/** Total UTF-8 byte length of a bundle's rendered text. */
export function bundleTextBytes(bundle: Bundle): number {
  return utf8Length(bundle.provenance.text);
}
