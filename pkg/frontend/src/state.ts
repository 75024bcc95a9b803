/**
 * Viewer state: the loaded bundle, the selected span, per-span judgments,
 * and the active span filter.
 *
 * Judgments are persisted to localStorage keyed by bundle id, so closing and
 * reopening a bundle keeps the review where it was, and can be exported as a
 * standalone report file and imported back without loss.
 */

import type {
  Bundle,
  JudgmentEntry,
  JudgmentReport,
  SpanFilter,
  SpanId,
  Verdict,
  ViewState,
} from "./types.js";
import { REPORT_SCHEMA_VERSION } from "./types.js";

export class ReportError extends Error {}

const STORAGE_PREFIX = "symgen-viewer/judgments/";

/** Minimal slice of the Storage interface the state layer needs. */
export interface JudgmentStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

function defaultStore(): JudgmentStore | null {
  return typeof localStorage === "undefined" ? null : localStorage;
}

function entriesFromJudgments(judgments: Map<SpanId, Verdict>): JudgmentEntry[] {
  const entries: JudgmentEntry[] = [];
  for (const [spanId, verdict] of judgments) {
    entries.push(
      verdict.kind === "verified"
        ? { span_id: spanId, verdict: "verified" }
        : { span_id: spanId, verdict: "flagged", note: verdict.note },
    );
  }
  entries.sort((a, b) => a.span_id - b.span_id);
  return entries;
}

function persist(state: ViewState, store: JudgmentStore | null): void {
  if (store === null) return;
  const entries = entriesFromJudgments(state.judgments);
  store.setItem(STORAGE_PREFIX + state.bundle.id, JSON.stringify(entries));
}

function restore(bundle: Bundle, store: JudgmentStore | null): Map<SpanId, Verdict> {
  const judgments = new Map<SpanId, Verdict>();
  if (store === null) return judgments;
  const raw = store.getItem(STORAGE_PREFIX + bundle.id);
  if (raw === null) return judgments;
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return judgments;
  }
  if (!Array.isArray(parsed)) return judgments;
  for (const item of parsed) {
    const verdict = verdictFromEntry(item, bundle);
    if (verdict !== null) judgments.set((item as JudgmentEntry).span_id, verdict);
  }
  return judgments;
}

/** Entry → verdict if structurally valid for this bundle, else null. */
function verdictFromEntry(item: unknown, bundle: Bundle): Verdict | null {
  if (typeof item !== "object" || item === null) return null;
  const entry = item as Record<string, unknown>;
  const spanId = entry.span_id;
  if (
    typeof spanId !== "number" ||
    !Number.isInteger(spanId) ||
    spanId < 0 ||
    spanId >= bundle.provenance.spans.length
  ) {
    return null;
  }
  if (entry.verdict === "verified" && entry.note === undefined) {
    return { kind: "verified" };
  }
  if (entry.verdict === "flagged" && typeof entry.note === "string") {
    return { kind: "flagged", note: entry.note };
  }
  return null;
}

// --- State operations ---------------------------------------------------------

/** Fresh state for a just-loaded bundle, picking up any persisted judgments. */
export function createViewState(bundle: Bundle, store: JudgmentStore | null = defaultStore()): ViewState {
  return {
    bundle,
    selectedSpan: null,
    judgments: restore(bundle, store),
    filter: "all",
  };
}

/** Record a verdict for a span. The span id must exist in the bundle. */
export function judgeSpan(
  state: ViewState,
  spanId: SpanId,
  verdict: Verdict,
  store: JudgmentStore | null = defaultStore(),
): void {
  if (spanId < 0 || spanId >= state.bundle.provenance.spans.length) {
    throw new ReportError(`no span with id ${spanId}`);
  }
  state.judgments.set(spanId, verdict);
  persist(state, store);
}

/** Remove a span's verdict (it becomes unjudged again). */
export function clearJudgment(
  state: ViewState,
  spanId: SpanId,
  store: JudgmentStore | null = defaultStore(),
): void {
  state.judgments.delete(spanId);
  persist(state, store);
}

/** True when every span in the bundle has been judged. */
export function isComplete(state: ViewState): boolean {
  return state.bundle.provenance.spans.length === state.judgments.size;
}

/** Does a span pass the active filter? (Used to emphasize/mute highlights.) */
export function spanMatchesFilter(state: ViewState, spanId: SpanId): boolean {
  switch (state.filter) {
    case "all":
      return true;
    case "errors-only":
      return state.bundle.provenance.spans[spanId].status === "undefined";
    case "unjudged":
      return !state.judgments.has(spanId);
  }
}

export function setFilter(state: ViewState, filter: SpanFilter): void {
  state.filter = filter;
}

// --- Report export / import ----------------------------------------------------

/** Snapshot the current judgments as a report object (serialize with JSON). */
export function exportReport(state: ViewState, now: Date = new Date()): JudgmentReport {
  return {
    schema_version: REPORT_SCHEMA_VERSION,
    bundle_id: state.bundle.id,
    timestamp: now.toISOString(),
    complete: isComplete(state),
    judgments: entriesFromJudgments(state.judgments),
  };
}

/**
 * Replace the state's judgments with those from a previously exported
 * report. The report must match this bundle; malformed entries reject the
 * whole import rather than applying half of it.
 */
export function importReport(
  state: ViewState,
  raw: unknown,
  store: JudgmentStore | null = defaultStore(),
): void {
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ReportError("report must be a JSON object");
  }
  const report = raw as Record<string, unknown>;
  if (report.schema_version !== REPORT_SCHEMA_VERSION) {
    throw new ReportError(`expected schema_version "${REPORT_SCHEMA_VERSION}"`);
  }
  if (report.bundle_id !== state.bundle.id) {
    throw new ReportError(
      `report is for bundle "${String(report.bundle_id)}", not "${state.bundle.id}"`,
    );
  }
  if (!Array.isArray(report.judgments)) {
    throw new ReportError('missing "judgments" array');
  }
  const imported = new Map<SpanId, Verdict>();
  report.judgments.forEach((item, i) => {
    const verdict = verdictFromEntry(item, state.bundle);
    if (verdict === null) throw new ReportError(`judgments[${i}] is malformed`);
    const spanId = (item as JudgmentEntry).span_id;
    if (imported.has(spanId)) throw new ReportError(`judgments[${i}] repeats span ${spanId}`);
    imported.set(spanId, verdict);
  });
  state.judgments = imported;
  persist(state, store);
}
