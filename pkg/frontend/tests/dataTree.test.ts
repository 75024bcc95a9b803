/** Collapsible document tree: registry, reveal, and highlighting. */

import { describe, expect, it } from "vitest";
import { buildDataTree } from "../src/dataTree.js";
import type { JsonValue } from "../src/types.js";

const DOC: { [key: string]: JsonValue } = {
  data: {
    name: "Jane",
    stats: [7, { label: "deep" }],
    "weird key": true,
    empty: null,
  },
};

describe("buildDataTree", () => {
  it("registers every node under its canonical path", () => {
    const tree = buildDataTree(DOC);
    for (const path of [
      "data",
      "data.name",
      "data.stats",
      "data.stats[0]",
      "data.stats[1]",
      "data.stats[1].label",
      "data['weird key']",
      "data.empty",
    ]) {
      expect(tree.rowFor(path), path).not.toBeNull();
    }
    expect(tree.rowFor("data.absent")).toBeNull();
  });

  it("renders leaf values as JSON and branches with size badges", () => {
    const tree = buildDataTree(DOC);
    expect(tree.rowFor("data.name")?.textContent).toBe('name"Jane"');
    expect(tree.rowFor("data.empty")?.textContent).toBe("emptynull");
    expect(tree.rowFor("data.stats")?.textContent).toBe("stats[2]");
    expect(tree.rowFor("data")?.textContent).toBe("data{4}");
  });

  it("reveals a deep path by opening its ancestors", () => {
    const tree = buildDataTree(DOC);
    document.body.replaceChildren(tree.root);
    const details = Array.from(tree.root.querySelectorAll("details"));
    // depth 2 starts collapsed
    const statsDetails = details.find((d) => d.querySelector(".pv-tree-key")?.textContent === "stats")!;
    const deepDetails = Array.from(tree.root.querySelectorAll("details")).find(
      (d) => d.querySelector(".pv-tree-key")?.textContent === "1",
    )!;
    deepDetails.open = false;
    statsDetails.open = false;
    expect(tree.reveal("data.stats[1].label")).toBe(true);
    expect(statsDetails.open).toBe(true);
    expect(deepDetails.open).toBe(true);
  });

  it("falls back to the longest existing prefix for missing paths", () => {
    const tree = buildDataTree(DOC);
    expect(tree.reveal("data.stats[9].label")).toBe(false);
    expect(tree.reveal("nowhere.at.all")).toBe(false);
    expect(tree.reveal("not even a path ][")).toBe(false);
  });

  it("highlights exact hits and prefix fallbacks distinctly", () => {
    const tree = buildDataTree(DOC);
    const exact = tree.highlight(["data.name", "data.missing", "data['weird key']"]);
    expect(exact).toBe(2);
    expect(tree.rowFor("data.name")?.classList.contains("pv-tree-hit")).toBe(true);
    expect(tree.rowFor("data['weird key']")?.classList.contains("pv-tree-hit")).toBe(true);
    // the missing path marks its parent softly
    expect(tree.rowFor("data")?.classList.contains("pv-tree-hit-partial")).toBe(true);
    tree.clearHighlights();
    expect(tree.root.querySelectorAll(".pv-tree-hit, .pv-tree-hit-partial")).toHaveLength(0);
  });
});
