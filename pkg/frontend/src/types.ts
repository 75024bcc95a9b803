/**
 * Wire-format types for `symgen_provenance_v1` bundles plus the viewer's own
 * state types. The bundle shapes mirror the JSON emitted by the exporter;
 * nothing here is invented beyond what appears on disk.
 */

export const SCHEMA_VERSION = "symgen_provenance_v1";

/** One grounded region of the rendered text. Offsets are UTF-8 byte offsets. */
export interface Span {
  start: number;
  end: number;
  expr_source: string;
  referenced_paths: string[];
  referenced_vars: string[];
  value_rendered: string;
  status: "ok" | "undefined";
}

/** A recoverable evaluation failure. Zero-width (start === end) entries come
 * from failed assignments, which emit no text of their own. */
export interface LocalError {
  expr_source: string;
  cause: string;
  start: number;
  end: number;
}

export interface GlobalError {
  message: string;
  position: number;
}

export interface GraphNode {
  id: string;
  kind: "set" | "output";
  expr_source: string;
  ok: boolean;
  value: unknown;
  var: string | null;
  version: number | null;
  span_index: number | null;
}

/** Dependency edge: `from` is the node that uses, `to` is what it uses —
 * another node id for `kind: "var"`, a canonical path string for `kind: "path"`. */
export interface GraphEdge {
  from: string;
  to: string;
  kind: "var" | "path";
}

export interface Graph {
  nodes: GraphNode[];
  edges: GraphEdge[];
}

export interface Provenance {
  schema_version: string;
  text: string;
  spans: Span[];
  local_errors: LocalError[];
  global_error: GlobalError | null;
  graph: Graph;
}

/** A JSON value as parsed from data.json. */
export type JsonValue =
  | null
  | boolean
  | number
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

/** One loaded bundle: the provenance record, the source document it was
 * rendered from, and the identifying metadata (id may be absent when the
 * bundle ships without meta.json). */
export interface Bundle {
  id: string;
  provenance: Provenance;
  document: { [key: string]: JsonValue };
  meta: { [key: string]: JsonValue } | null;
}

// --- Viewer state ---

/** Spans carry no explicit id on the wire; their index in `spans` is the id. */
export type SpanId = number;

export type Verdict =
  | { kind: "verified" }
  | { kind: "flagged"; note: string };

export type SpanFilter = "all" | "errors-only" | "unjudged";

export interface ViewState {
  bundle: Bundle;
  selectedSpan: SpanId | null;
  judgments: Map<SpanId, Verdict>;
  filter: SpanFilter;
}

/** Judgment report written by the export action and accepted back on import. */
export interface JudgmentReport {
  schema_version: string;
  bundle_id: string;
  timestamp: string;
  complete: boolean;
  judgments: JudgmentEntry[];
}

export interface JudgmentEntry {
  span_id: SpanId;
  verdict: "verified" | "flagged";
  note?: string;
}

export const REPORT_SCHEMA_VERSION = "symgen_judgments_v1";
