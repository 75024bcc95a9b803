/**
 * The viewer itself: wires bundle, text pane, data tree, tooltip, and
 * judgment state together behind one object. The page shell (main.ts) only
 * handles file I/O and top-level controls; everything observable lives here
 * so it can be driven directly in tests.
 */

import { BundleError, bundleFromFiles } from "./bundle.js";
import { buildDataTree, type TreeHandle } from "./dataTree.js";
import {
  clearJudgment,
  createViewState,
  exportReport,
  importReport,
  isComplete,
  judgeSpan,
  setFilter,
  type JudgmentStore,
} from "./state.js";
import { buildTextPane, type TextPaneHandle } from "./textPane.js";
import { createTooltip, type TooltipHandle } from "./tooltip.js";
import type {
  Bundle,
  JudgmentReport,
  SpanFilter,
  SpanId,
  Verdict,
  ViewState,
} from "./types.js";

export interface ViewerElements {
  /** Container the rendered text is built into. */
  textPane: HTMLElement;
  /** Container the document tree is built into. */
  dataPane: HTMLElement;
  /** Region for schema/global-error banners. */
  banner: HTMLElement;
  /** One-line status: span counts, judgment progress. */
  status: HTMLElement;
  /** Layer the tooltip attaches to (usually document.body). */
  tooltipLayer: HTMLElement;
}

export class Viewer {
  private readonly elements: ViewerElements;
  private readonly store: JudgmentStore | null;
  readonly tooltip: TooltipHandle;
  state: ViewState | null = null;
  textPane: TextPaneHandle | null = null;
  tree: TreeHandle | null = null;

  constructor(elements: ViewerElements, store: JudgmentStore | null | undefined = undefined) {
    this.elements = elements;
    this.store = store === undefined ? defaultStoreOrNull() : store;
    this.tooltip = createTooltip(elements.tooltipLayer, {
      onJudge: (spanId, verdict) => this.judgeSpan(spanId, verdict),
      onClearJudgment: (spanId) => this.clearJudgment(spanId),
    });
  }

  // --- Loading ---

  /** Load an already-validated bundle. */
  loadBundle(bundle: Bundle): void {
    this.clearBanners();
    this.tooltip.hide(true);
    this.state = createViewState(bundle, this.store);
    this.textPane = buildTextPane(bundle, {
      onSpanEnter: (spanId, anchor) => this.hoverSpan(spanId, anchor),
      onSpanLeave: () => this.tooltip.hide(false),
      onSpanActivate: (spanId, anchor) => this.selectSpan(spanId, anchor),
      onMarkerEnter: (errorIndex, anchor) => this.hoverMarker(errorIndex, anchor),
      onMarkerLeave: () => this.tooltip.hide(false),
    });
    this.elements.textPane.replaceChildren(this.textPane.root);
    this.tree = buildDataTree(bundle.document);
    this.elements.dataPane.replaceChildren(this.tree.root);
    this.textPane.applyFilter(this.state);
    this.textPane.applyJudgments(this.state);
    const globalError = bundle.provenance.global_error;
    if (globalError !== null) {
      const at = globalError.position === null ? "" : ` (at byte ${globalError.position})`;
      this.showBanner("pv-banner--global", `rendering failed: ${globalError.message}${at}`);
    }
    this.updateStatus();
  }

  /**
   * Load from raw file contents. On any validation failure the panes are
   * emptied and a banner explains why — never a partial render.
   */
  loadBundleFromFiles(files: { name: string; text: string }[]): void {
    let bundle: Bundle;
    try {
      bundle = bundleFromFiles(files);
    } catch (exc) {
      this.state = null;
      this.textPane = null;
      this.tree = null;
      this.elements.textPane.replaceChildren();
      this.elements.dataPane.replaceChildren();
      this.tooltip.hide(true);
      this.clearBanners();
      const message = exc instanceof BundleError ? exc.message : String(exc);
      this.showBanner("pv-banner--schema", `bundle rejected: ${message}`);
      this.updateStatus();
      return;
    }
    this.loadBundle(bundle);
  }

  // --- Span interaction ---

  private hoverSpan(spanId: SpanId, anchor: HTMLElement): void {
    if (this.state === null) return;
    this.tooltip.showForSpan(this.state.bundle, spanId, this.state.judgments.get(spanId) ?? null, anchor, false);
  }

  private hoverMarker(errorIndex: number, anchor: HTMLElement): void {
    if (this.textPane === null) return;
    this.tooltip.showForError(this.textPane.markerErrors[errorIndex], anchor);
  }

  /** Click/keyboard activation: pin the tooltip and focus the data tree on
   *  the span's referenced paths. */
  selectSpan(spanId: SpanId, anchor?: HTMLElement): void {
    if (this.state === null || this.textPane === null || this.tree === null) return;
    this.state.selectedSpan = spanId;
    this.textPane.setSelected(spanId);
    const target = anchor ?? this.textPane.spanElements[spanId];
    this.tooltip.showForSpan(this.state.bundle, spanId, this.state.judgments.get(spanId) ?? null, target, true);
    const paths = this.state.bundle.provenance.spans[spanId].referenced_paths;
    this.tree.clearHighlights();
    if (paths.length > 0) {
      this.tree.highlight(paths);
      this.tree.reveal(paths[0]);
    }
  }

  /** Drop selection, unpin the tooltip, clear tree highlights. */
  deselect(): void {
    if (this.state !== null) this.state.selectedSpan = null;
    this.textPane?.setSelected(null);
    this.tree?.clearHighlights();
    this.tooltip.hide(true);
  }

  // --- Judgments ---

  judgeSpan(spanId: SpanId, verdict: Verdict): void {
    if (this.state === null || this.textPane === null) return;
    judgeSpan(this.state, spanId, verdict, this.store);
    this.textPane.applyJudgments(this.state);
    this.textPane.applyFilter(this.state);
    this.refreshPinnedTooltip(spanId);
    this.updateStatus();
  }

  clearJudgment(spanId: SpanId): void {
    if (this.state === null || this.textPane === null) return;
    clearJudgment(this.state, spanId, this.store);
    this.textPane.applyJudgments(this.state);
    this.textPane.applyFilter(this.state);
    this.refreshPinnedTooltip(spanId);
    this.updateStatus();
  }

  private refreshPinnedTooltip(spanId: SpanId): void {
    if (this.state === null || this.textPane === null) return;
    if (this.state.selectedSpan !== spanId || !this.tooltip.isPinned()) return;
    this.tooltip.showForSpan(
      this.state.bundle,
      spanId,
      this.state.judgments.get(spanId) ?? null,
      this.textPane.spanElements[spanId],
      true,
    );
  }

  // --- Filter, report, status ---

  setFilter(filter: SpanFilter): void {
    if (this.state === null || this.textPane === null) return;
    setFilter(this.state, filter);
    this.textPane.applyFilter(this.state);
    this.updateStatus();
  }

  shownSpanCount(): number {
    return this.textPane?.shownCount() ?? 0;
  }

  exportReport(now?: Date): JudgmentReport {
    if (this.state === null) throw new BundleError("no bundle loaded");
    return exportReport(this.state, now);
  }

  importReport(raw: unknown): void {
    if (this.state === null || this.textPane === null) throw new BundleError("no bundle loaded");
    importReport(this.state, raw, this.store);
    this.textPane.applyJudgments(this.state);
    this.textPane.applyFilter(this.state);
    this.updateStatus();
  }

  // --- Banners / status ---

  private showBanner(cls: string, message: string): void {
    const banner = document.createElement("div");
    banner.className = `pv-banner ${cls}`;
    banner.textContent = message;
    this.elements.banner.appendChild(banner);
  }

  private clearBanners(): void {
    this.elements.banner.replaceChildren();
  }

  private updateStatus(): void {
    if (this.state === null || this.textPane === null) {
      this.elements.status.textContent = "no bundle loaded";
      return;
    }
    const total = this.state.bundle.provenance.spans.length;
    const shown = this.textPane.shownCount();
    const judged = this.state.judgments.size;
    const done = isComplete(this.state) ? " · review complete" : "";
    this.elements.status.textContent =
      `${this.state.bundle.id} · ${shown} shown · ${judged}/${total} judged${done}`;
  }
}

function defaultStoreOrNull(): JudgmentStore | null {
  return typeof localStorage === "undefined" ? null : localStorage;
}
