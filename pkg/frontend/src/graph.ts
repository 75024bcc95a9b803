/**
 * Queries over a bundle's computation graph.
 *
 * The graph records every assignment and output evaluation as a node, with
 * edges pointing from each node to what it consumed: other nodes for
 * variable reads, canonical path strings for document reads. The viewer uses
 * it to explain a span whose value came through intermediate variables.
 */

import type { Graph, GraphNode, SpanId } from "./types.js";

/** One line of a computation-chain display, in evaluation order. */
export interface ChainStep {
  nodeId: string;
  varName: string | null;
  exprSource: string;
  value: unknown;
  ok: boolean;
}

/** The output node that produced a given span, if the graph records one. */
export function nodeForSpan(graph: Graph, spanId: SpanId): GraphNode | null {
  for (const node of graph.nodes) {
    if (node.kind === "output" && node.span_index === spanId) return node;
  }
  return null;
}

/**
 * All assignment nodes a span's value depends on, directly or transitively,
 * ordered as they were evaluated. Empty when the span reads the document
 * only.
 */
export function computationChain(graph: Graph, spanId: SpanId): ChainStep[] {
  const start = nodeForSpan(graph, spanId);
  if (start === null) return [];

  const byId = new Map<string, GraphNode>(graph.nodes.map((n) => [n.id, n]));
  const varDeps = new Map<string, string[]>();
  for (const edge of graph.edges) {
    if (edge.kind !== "var") continue;
    const deps = varDeps.get(edge.from);
    if (deps === undefined) varDeps.set(edge.from, [edge.to]);
    else deps.push(edge.to);
  }

  const seen = new Set<string>();
  const stack = [...(varDeps.get(start.id) ?? [])];
  while (stack.length > 0) {
    const id = stack.pop()!;
    if (seen.has(id)) continue;
    seen.add(id);
    stack.push(...(varDeps.get(id) ?? []));
  }

  // Node order in the bundle is evaluation order; keep it for display.
  const steps: ChainStep[] = [];
  for (const node of graph.nodes) {
    if (!seen.has(node.id)) continue;
    steps.push({
      nodeId: node.id,
      varName: node.var,
      exprSource: node.expr_source,
      value: node.value,
      ok: node.ok,
    });
  }
  return steps;
}

/** Compact one-line rendering of a step's value for tooltips. */
export function formatStepValue(step: ChainStep): string {
  if (!step.ok) return "(failed)";
  return JSON.stringify(step.value) ?? "null";
}
