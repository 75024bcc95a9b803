/**
 * The rendered-text pane.
 *
 * Tiles the bundle text into plain text nodes and highlighted span elements
 * so that the pane's concatenated text equals the bundle text exactly —
 * every filter and judgment action only toggles classes, never content.
 *
 * Failed assignments have no text of their own; each one gets a zero-width
 * marker element at its recorded position (its icon is CSS-generated, so it
 * adds nothing to the text). Together, undefined spans plus these markers
 * account one-for-one for the bundle's local errors.
 */

import { ByteIndex } from "./bytes.js";
import { spanMatchesFilter } from "./state.js";
import type { Bundle, LocalError, SpanId, ViewState } from "./types.js";

export interface TextPaneCallbacks {
  onSpanEnter(spanId: SpanId, anchor: HTMLElement): void;
  onSpanLeave(spanId: SpanId): void;
  /** Click or keyboard activation (Enter / Space). */
  onSpanActivate(spanId: SpanId, anchor: HTMLElement): void;
  onMarkerEnter(errorIndex: number, anchor: HTMLElement): void;
  onMarkerLeave(errorIndex: number): void;
}

export interface TextPaneHandle {
  root: HTMLElement;
  /** Highlight elements by span id. */
  spanElements: HTMLElement[];
  /** Zero-width markers, by index into `markerErrors`. */
  markerElements: HTMLElement[];
  /** The local errors shown as markers (those not anchored to a span). */
  markerErrors: LocalError[];
  applyFilter(state: ViewState): void;
  applyJudgments(state: ViewState): void;
  setSelected(spanId: SpanId | null): void;
  /** Spans + markers currently emphasized by the active filter. */
  shownCount(): number;
}

interface Tile {
  start: number;
  end: number;
  kind: "span" | "marker";
  index: number; // span id or marker index
}

/**
 * Split local errors into span-anchored ones (an undefined span exists at
 * exactly their offsets) and free-standing ones that need a marker. Matching
 * consumes each span at most once, so counts stay one-to-one.
 */
function splitErrors(bundle: Bundle): { markers: LocalError[]; spanCause: Map<SpanId, string> } {
  const prov = bundle.provenance;
  const unclaimed = new Map<string, SpanId[]>();
  prov.spans.forEach((span, id) => {
    if (span.status !== "undefined") return;
    const key = `${span.start}:${span.end}`;
    const ids = unclaimed.get(key);
    if (ids === undefined) unclaimed.set(key, [id]);
    else ids.push(id);
  });
  const markers: LocalError[] = [];
  const spanCause = new Map<SpanId, string>();
  for (const err of prov.local_errors) {
    const ids = unclaimed.get(`${err.start}:${err.end}`);
    const spanId = ids?.shift();
    if (spanId === undefined) markers.push(err);
    else spanCause.set(spanId, err.cause);
  }
  return { markers, spanCause };
}

export function buildTextPane(bundle: Bundle, callbacks: TextPaneCallbacks): TextPaneHandle {
  const prov = bundle.provenance;
  const index = new ByteIndex(prov.text);
  const { markers } = splitErrors(bundle);

  const tiles: Tile[] = [];
  prov.spans.forEach((span, id) => {
    tiles.push({ start: span.start, end: span.end, kind: "span", index: id });
  });
  markers.forEach((err, i) => {
    tiles.push({ start: err.start, end: err.start, kind: "marker", index: i });
  });
  // Position order; a zero-width marker sorts before a span starting at the
  // same offset. The sort is stable, so equal markers keep error order.
  tiles.sort((a, b) => a.start - b.start || a.end - b.end);

  const root = document.createElement("div");
  root.className = "pv-text";
  const spanElements: HTMLElement[] = [];
  const markerElements: HTMLElement[] = [];

  let cursor = 0;
  for (const tile of tiles) {
    if (tile.start > cursor) {
      root.appendChild(document.createTextNode(index.slice(cursor, tile.start)));
    }
    if (tile.kind === "span") {
      const span = prov.spans[tile.index];
      const el = document.createElement("span");
      el.className = span.status === "ok" ? "pv-span pv-span--ok" : "pv-span pv-span--error";
      el.tabIndex = 0;
      el.setAttribute("role", "button");
      el.dataset.spanId = String(tile.index);
      el.dataset.shown = "true";
      el.textContent = index.slice(span.start, span.end);
      const spanId = tile.index;
      el.addEventListener("mouseenter", () => callbacks.onSpanEnter(spanId, el));
      el.addEventListener("mouseleave", () => callbacks.onSpanLeave(spanId));
      el.addEventListener("focus", () => callbacks.onSpanEnter(spanId, el));
      el.addEventListener("blur", () => callbacks.onSpanLeave(spanId));
      el.addEventListener("click", () => callbacks.onSpanActivate(spanId, el));
      el.addEventListener("keydown", (event) => {
        if (event.key === "Enter" || event.key === " ") {
          event.preventDefault();
          callbacks.onSpanActivate(spanId, el);
        }
      });
      spanElements[tile.index] = el;
      root.appendChild(el);
      cursor = span.end;
    } else {
      const err = markers[tile.index];
      const el = document.createElement("span");
      el.className = "pv-marker";
      el.tabIndex = 0;
      el.setAttribute("role", "button");
      el.dataset.errorId = String(tile.index);
      el.dataset.shown = "true";
      el.setAttribute("aria-label", `failed assignment: ${err.cause}`);
      const markerIndex = tile.index;
      el.addEventListener("mouseenter", () => callbacks.onMarkerEnter(markerIndex, el));
      el.addEventListener("mouseleave", () => callbacks.onMarkerLeave(markerIndex));
      el.addEventListener("focus", () => callbacks.onMarkerEnter(markerIndex, el));
      el.addEventListener("blur", () => callbacks.onMarkerLeave(markerIndex));
      markerElements[tile.index] = el;
      root.appendChild(el);
      // cursor unchanged: markers occupy no text
    }
  }
  const tail = index.slice(cursor, index.byteLength);
  if (tail.length > 0) root.appendChild(document.createTextNode(tail));

  function setShown(el: HTMLElement, shown: boolean): void {
    el.dataset.shown = shown ? "true" : "false";
    el.classList.toggle("pv-muted", !shown);
  }

  return {
    root,
    spanElements,
    markerElements,
    markerErrors: markers,
    applyFilter(state: ViewState): void {
      spanElements.forEach((el, id) => setShown(el, spanMatchesFilter(state, id)));
      // Markers surface errors; they stay visible except under "unjudged",
      // which shows remaining review work and markers take no judgment.
      const markersShown = state.filter !== "unjudged";
      markerElements.forEach((el) => setShown(el, markersShown));
    },
    applyJudgments(state: ViewState): void {
      spanElements.forEach((el, id) => {
        const verdict = state.judgments.get(id);
        el.classList.toggle("pv-span--verified", verdict?.kind === "verified");
        el.classList.toggle("pv-span--flagged", verdict?.kind === "flagged");
      });
    },
    setSelected(spanId: SpanId | null): void {
      spanElements.forEach((el, id) => {
        el.classList.toggle("pv-span--selected", id === spanId);
      });
    },
    shownCount(): number {
      let count = 0;
      for (const el of [...spanElements, ...markerElements]) {
        if (el.dataset.shown === "true") count += 1;
      }
      return count;
    },
  };
}
