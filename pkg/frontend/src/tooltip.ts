/**
 * Span inspector tooltip.
 *
 * Hovering or focusing a span shows what it rendered and where the value
 * came from: the expression, the rendered value, the document paths it
 * read, and — when the value flowed through assignments — the computation
 * chain as an ordered step list. Clicking pins the tooltip and adds the
 * judgment controls (verify / flag with note).
 *
 * All content is set via textContent; bundle data never becomes markup.
 */

import { computationChain, formatStepValue, type ChainStep } from "./graph.js";
import type { Bundle, LocalError, Span, SpanId, Verdict } from "./types.js";

export interface TooltipCallbacks {
  onJudge(spanId: SpanId, verdict: Verdict): void;
  onClearJudgment(spanId: SpanId): void;
}

export interface TooltipHandle {
  root: HTMLElement;
  /** Show details for a span; `pin` keeps it open and adds judgment controls. */
  showForSpan(bundle: Bundle, spanId: SpanId, verdict: Verdict | null, anchor: HTMLElement, pin: boolean): void;
  /** Show details for a free-standing local error (failed assignment). */
  showForError(error: LocalError, anchor: HTMLElement): void;
  /** Hide the tooltip; a pinned tooltip only closes with `force`. */
  hide(force?: boolean): void;
  isPinned(): boolean;
}

function rowEl(label: string, content: HTMLElement | string): HTMLElement {
  const row = document.createElement("div");
  row.className = "pv-tip-row";
  const labelEl = document.createElement("span");
  labelEl.className = "pv-tip-label";
  labelEl.textContent = label;
  row.appendChild(labelEl);
  if (typeof content === "string") {
    const value = document.createElement("span");
    value.textContent = content;
    row.appendChild(value);
  } else {
    row.appendChild(content);
  }
  return row;
}

function codeEl(text: string): HTMLElement {
  const code = document.createElement("code");
  code.textContent = text;
  return code;
}

function pathListEl(paths: string[]): HTMLElement {
  const list = document.createElement("ul");
  list.className = "pv-tip-paths";
  for (const path of paths) {
    const item = document.createElement("li");
    item.appendChild(codeEl(path));
    list.appendChild(item);
  }
  return list;
}

function chainListEl(steps: ChainStep[]): HTMLElement {
  const list = document.createElement("ol");
  list.className = "pv-tip-chain";
  for (const step of steps) {
    const item = document.createElement("li");
    if (!step.ok) item.className = "pv-tip-chain-failed";
    const lhs = step.varName === null ? step.exprSource : `${step.varName} = ${step.exprSource}`;
    item.appendChild(codeEl(lhs));
    const arrow = document.createElement("span");
    arrow.className = "pv-tip-chain-value";
    arrow.textContent = ` → ${formatStepValue(step)}`;
    item.appendChild(arrow);
    list.appendChild(item);
  }
  return list;
}

/** Failure cause for an undefined span: the local error at its offsets. */
function causeForSpan(bundle: Bundle, span: Span): string | null {
  for (const err of bundle.provenance.local_errors) {
    if (err.start === span.start && err.end === span.end) return err.cause;
  }
  return null;
}

export function createTooltip(container: HTMLElement, callbacks: TooltipCallbacks): TooltipHandle {
  const root = document.createElement("div");
  root.className = "pv-tooltip";
  root.style.display = "none";
  container.appendChild(root);
  let pinned = false;

  function position(anchor: HTMLElement): void {
    const rect = anchor.getBoundingClientRect();
    let left = rect.left;
    let top = rect.bottom + 6;
    // Clamp into the viewport once the tooltip has a size.
    if (root.offsetWidth > 0 && left + root.offsetWidth > window.innerWidth - 8) {
      left = Math.max(8, window.innerWidth - root.offsetWidth - 8);
    }
    if (root.offsetHeight > 0 && top + root.offsetHeight > window.innerHeight - 8) {
      top = Math.max(8, rect.top - root.offsetHeight - 6);
    }
    root.style.left = `${left}px`;
    root.style.top = `${top}px`;
  }

  function judgmentSection(spanId: SpanId, verdict: Verdict | null): HTMLElement {
    const section = document.createElement("div");
    section.className = "pv-tip-judgment";

    const current = document.createElement("div");
    current.className = "pv-tip-verdict";
    if (verdict === null) {
      current.textContent = "not judged yet";
    } else if (verdict.kind === "verified") {
      current.textContent = "verified ✓";
    } else {
      current.textContent = verdict.note === "" ? "flagged" : `flagged: ${verdict.note}`;
    }
    section.appendChild(current);

    const controls = document.createElement("div");
    controls.className = "pv-tip-controls";

    const verifyBtn = document.createElement("button");
    verifyBtn.type = "button";
    verifyBtn.className = "pv-btn pv-btn--verify";
    verifyBtn.textContent = "Verify";
    verifyBtn.addEventListener("click", () => callbacks.onJudge(spanId, { kind: "verified" }));
    controls.appendChild(verifyBtn);

    const noteInput = document.createElement("input");
    noteInput.type = "text";
    noteInput.className = "pv-note-input";
    noteInput.placeholder = "note";
    if (verdict?.kind === "flagged") noteInput.value = verdict.note;
    controls.appendChild(noteInput);

    const flagBtn = document.createElement("button");
    flagBtn.type = "button";
    flagBtn.className = "pv-btn pv-btn--flag";
    flagBtn.textContent = "Flag";
    flagBtn.addEventListener("click", () =>
      callbacks.onJudge(spanId, { kind: "flagged", note: noteInput.value }),
    );
    controls.appendChild(flagBtn);

    if (verdict !== null) {
      const clearBtn = document.createElement("button");
      clearBtn.type = "button";
      clearBtn.className = "pv-btn pv-btn--clear";
      clearBtn.textContent = "Clear";
      clearBtn.addEventListener("click", () => callbacks.onClearJudgment(spanId));
      controls.appendChild(clearBtn);
    }
    section.appendChild(controls);
    return section;
  }

  return {
    root,
    showForSpan(bundle, spanId, verdict, anchor, pin): void {
      if (pinned && !pin) return; // hover must not replace a pinned tooltip
      const span = bundle.provenance.spans[spanId];
      root.replaceChildren();
      root.appendChild(rowEl("expression", codeEl(span.expr_source)));
      root.appendChild(rowEl("value", codeEl(span.value_rendered)));
      if (span.status === "undefined") {
        const cause = causeForSpan(bundle, span);
        root.appendChild(rowEl("status", cause === null ? "undefined" : `undefined — ${cause}`));
      }
      if (span.referenced_paths.length > 0) {
        root.appendChild(rowEl("reads", pathListEl(span.referenced_paths)));
      }
      const chain = computationChain(bundle.provenance.graph, spanId);
      if (chain.length > 0) {
        root.appendChild(rowEl("computed from", chainListEl(chain)));
      }
      if (pin) {
        root.appendChild(judgmentSection(spanId, verdict));
      }
      root.style.display = "block";
      position(anchor);
      pinned = pin;
    },
    showForError(error, anchor): void {
      if (pinned) return;
      root.replaceChildren();
      root.appendChild(rowEl("failed assignment", codeEl(error.expr_source)));
      root.appendChild(rowEl("cause", error.cause));
      root.style.display = "block";
      position(anchor);
    },
    hide(force = false): void {
      if (pinned && !force) return;
      pinned = false;
      root.style.display = "none";
    },
    isPinned(): boolean {
      return pinned;
    },
  };
}
