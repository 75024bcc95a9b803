/**
 * Collapsible tree view of a bundle's source document.
 *
 * Every node is registered under its canonical path text, so a span's
 * referenced paths can be revealed (ancestors expanded, row scrolled into
 * view) and highlighted. A path that does not exist in the document — the
 * usual case for an undefined span — falls back to its longest existing
 * prefix, marked with a softer style.
 */

import { parsePathText, pathText, type PathSegment } from "./paths.js";
import type { JsonValue } from "./types.js";

interface TreeEntry {
  /** The row to mark: a branch's summary or a leaf's own element. */
  row: HTMLElement;
  /** Every <details> that must be open for the row to be visible. */
  ancestors: HTMLDetailsElement[];
}

export interface TreeHandle {
  root: HTMLElement;
  /** Expand and scroll to a path (or its longest existing prefix). */
  reveal(path: string): boolean;
  /** Mark a set of paths; returns how many exist verbatim in the document. */
  highlight(paths: string[]): number;
  clearHighlights(): void;
  /** Look up a registered row (exposed for tests). */
  rowFor(path: string): HTMLElement | null;
}

const OPEN_DEPTH = 1; // depth 0 and 1 start expanded

function isBranch(value: JsonValue): value is JsonValue[] | { [key: string]: JsonValue } {
  return typeof value === "object" && value !== null;
}

function branchBadge(value: JsonValue[] | { [key: string]: JsonValue }): string {
  if (Array.isArray(value)) return `[${value.length}]`;
  return `{${Object.keys(value).length}}`;
}

export function buildDataTree(doc: { [key: string]: JsonValue }): TreeHandle {
  const registry = new Map<string, TreeEntry>();
  const marked: HTMLElement[] = [];
  const root = document.createElement("div");
  root.className = "pv-tree";

  function addNode(
    parent: HTMLElement,
    key: PathSegment,
    value: JsonValue,
    segments: PathSegment[],
    ancestors: HTMLDetailsElement[],
    depth: number,
  ): void {
    const label = typeof key === "number" ? String(key) : key;
    const path = pathText(segments);
    if (isBranch(value)) {
      const details = document.createElement("details");
      details.className = "pv-tree-branch";
      details.open = depth <= OPEN_DEPTH;
      const summary = document.createElement("summary");
      const keyEl = document.createElement("span");
      keyEl.className = "pv-tree-key";
      keyEl.textContent = label;
      const badge = document.createElement("span");
      badge.className = "pv-tree-badge";
      badge.textContent = branchBadge(value);
      summary.appendChild(keyEl);
      summary.appendChild(badge);
      details.appendChild(summary);
      const children = document.createElement("div");
      children.className = "pv-tree-children";
      details.appendChild(children);
      parent.appendChild(details);
      registry.set(path, { row: summary, ancestors });
      const childAncestors = [...ancestors, details];
      if (Array.isArray(value)) {
        value.forEach((item, i) => {
          addNode(children, i, item, [...segments, i], childAncestors, depth + 1);
        });
      } else {
        for (const childKey of Object.keys(value)) {
          addNode(children, childKey, value[childKey], [...segments, childKey], childAncestors, depth + 1);
        }
      }
    } else {
      const leaf = document.createElement("div");
      leaf.className = "pv-tree-leaf";
      const keyEl = document.createElement("span");
      keyEl.className = "pv-tree-key";
      keyEl.textContent = label;
      const valueEl = document.createElement("span");
      valueEl.className = "pv-tree-value";
      valueEl.textContent = JSON.stringify(value);
      leaf.appendChild(keyEl);
      leaf.appendChild(valueEl);
      parent.appendChild(leaf);
      registry.set(path, { row: leaf, ancestors });
    }
  }

  for (const key of Object.keys(doc)) {
    addNode(root, key, doc[key], [key], [], 0);
  }

  /** Longest registered prefix of a path, or null when even the first
      segment is absent. */
  function resolve(path: string): { entry: TreeEntry; exact: boolean } | null {
    const exact = registry.get(path);
    if (exact !== undefined) return { entry: exact, exact: true };
    let segments: PathSegment[];
    try {
      segments = parsePathText(path);
    } catch {
      return null;
    }
    for (let n = segments.length - 1; n >= 1; n--) {
      const prefix = registry.get(pathText(segments.slice(0, n)));
      if (prefix !== undefined) return { entry: prefix, exact: false };
    }
    return null;
  }

  function mark(row: HTMLElement, cls: string): void {
    row.classList.add(cls);
    marked.push(row);
  }

  return {
    root,
    reveal(path: string): boolean {
      const hit = resolve(path);
      if (hit === null) return false;
      for (const details of hit.entry.ancestors) details.open = true;
      if (typeof hit.entry.row.scrollIntoView === "function") {
        hit.entry.row.scrollIntoView({ block: "nearest" });
      }
      return hit.exact;
    },
    highlight(paths: string[]): number {
      let exactHits = 0;
      for (const path of paths) {
        const hit = resolve(path);
        if (hit === null) continue;
        if (hit.exact) {
          mark(hit.entry.row, "pv-tree-hit");
          exactHits += 1;
        } else {
          mark(hit.entry.row, "pv-tree-hit-partial");
        }
      }
      return exactHits;
    },
    clearHighlights(): void {
      for (const row of marked) {
        row.classList.remove("pv-tree-hit", "pv-tree-hit-partial");
      }
      marked.length = 0;
    },
    rowFor(path: string): HTMLElement | null {
      return registry.get(path)?.row ?? null;
    },
  };
}
