/**
 * Shared test utilities: fixture bundles exported by the generation
 * pipeline, an in-memory judgment store, and a DOM harness wrapping a
 * Viewer. Fixtures live under tests/fixtures/, one directory per bundle.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { parseBundle } from "../src/bundle.js";
import type { JudgmentStore } from "../src/state.js";
import { Viewer, type ViewerElements } from "../src/viewer.js";
import type { Bundle } from "../src/types.js";

// vitest runs from the package root; import.meta.url is not a file URL
// under the jsdom environment, so anchor on the working directory instead.
const FIXTURE_DIR = join(process.cwd(), "tests", "fixtures");

/** Every bundle fixture directory. */
export const FIXTURE_NAMES = ["arith", "chain", "errors", "globalerr", "ohio", "unicode"] as const;
export type FixtureName = (typeof FIXTURE_NAMES)[number];

export function fixtureText(name: FixtureName, file: string): string {
  return readFileSync(join(FIXTURE_DIR, name, file), "utf8");
}

export function fixtureJson(name: FixtureName, file: string): unknown {
  return JSON.parse(fixtureText(name, file));
}

/** Load and validate one fixture bundle. */
export function loadFixture(name: FixtureName): Bundle {
  return parseBundle({
    provenance: fixtureJson(name, "provenance.json"),
    document: fixtureJson(name, "data.json"),
    meta: fixtureJson(name, "meta.json"),
  });
}

/** Raw provenance JSON, deep-copied so tests can tamper with it freely. */
export function rawProvenance(name: FixtureName): Record<string, unknown> {
  return fixtureJson(name, "provenance.json") as Record<string, unknown>;
}

/** Judgment store backed by a Map — one per test, no cross-test bleed. */
export function memoryStore(): JudgmentStore {
  const map = new Map<string, string>();
  return {
    getItem: (key) => map.get(key) ?? null,
    setItem: (key, value) => {
      map.set(key, value);
    },
  };
}

export interface Harness {
  viewer: Viewer;
  elements: ViewerElements;
  store: JudgmentStore;
}

/** Fresh DOM scaffold + viewer. Clears document.body first. */
export function makeHarness(store: JudgmentStore = memoryStore()): Harness {
  document.body.replaceChildren();
  const elements: ViewerElements = {
    textPane: document.createElement("div"),
    dataPane: document.createElement("div"),
    banner: document.createElement("div"),
    status: document.createElement("div"),
    tooltipLayer: document.createElement("div"),
  };
  for (const el of Object.values(elements)) document.body.appendChild(el);
  return { viewer: new Viewer(elements, store), elements, store };
}

/** Deterministic RNG for property-style tests (mulberry32). */
export function seededRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randomInt(rng: () => number, bound: number): number {
  return Math.floor(rng() * bound);
}

export function choice<T>(rng: () => number, items: readonly T[]): T {
  return items[randomInt(rng, items.length)];
}
