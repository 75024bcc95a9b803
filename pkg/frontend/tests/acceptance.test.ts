/**
 * Acceptance gate for the viewer, one test per release criterion.
 *
 * Each test prints one `[acceptance] <criterion>: PASS|FAIL` line (mirroring
 * the generator test suite) and asserts the criterion itself.
 */

import { describe, expect, it } from "vitest";
import { FIXTURE_NAMES, loadFixture, makeHarness, memoryStore } from "./helpers.js";

function criterion(name: string, run: () => void): void {
  try {
    run();
  } catch (exc) {
    console.log(`[acceptance] ${name}: FAIL`);
    throw exc;
  }
  console.log(`[acceptance] ${name}: PASS`);
}

describe("acceptance", () => {
  it("reproduces every bundle's text byte-for-byte in the DOM", () => {
    criterion("byte-exact text", () => {
      const encoder = new TextEncoder();
      for (const name of FIXTURE_NAMES) {
        const { viewer, elements } = makeHarness();
        const bundle = loadFixture(name);
        viewer.loadBundle(bundle);
        const rendered = encoder.encode(elements.textPane.textContent ?? "");
        const expected = encoder.encode(bundle.provenance.text);
        expect(Array.from(rendered), name).toEqual(Array.from(expected));
      }
    });
  });

  it("lists both source paths when the arithmetic span is hovered", () => {
    criterion("two-path hover", () => {
      const { viewer } = makeHarness();
      viewer.loadBundle(loadFixture("arith"));
      const span = viewer.textPane!.spanElements[0];
      expect(span.textContent).toBe("42");
      span.dispatchEvent(new MouseEvent("mouseenter"));
      const paths = Array.from(viewer.tooltip.root.querySelectorAll(".pv-tip-paths li")).map(
        (li) => li.textContent,
      );
      expect(paths).toEqual(["data.pts_qtr1", "data.pts_qtr2"]);
    });
  });

  it("shows exactly one entry per local error under the errors-only filter", () => {
    criterion("errors-only count", () => {
      for (const name of FIXTURE_NAMES) {
        const { viewer } = makeHarness();
        const bundle = loadFixture(name);
        viewer.loadBundle(bundle);
        viewer.setFilter("errors-only");
        expect(viewer.shownSpanCount(), name).toBe(bundle.provenance.local_errors.length);
      }
    });
  });

  it("round-trips judgments losslessly through export and import", () => {
    criterion("judgment round-trip", () => {
      const first = makeHarness(memoryStore());
      first.viewer.loadBundle(loadFixture("unicode"));
      first.viewer.judgeSpan(0, { kind: "verified" });
      first.viewer.judgeSpan(1, { kind: "flagged", note: "значение 💚 disagrees" });
      first.viewer.judgeSpan(2, { kind: "verified" });
      const report = first.viewer.exportReport();
      expect(report.complete).toBe(true); // every span judged

      // A fresh viewer with a fresh store knows nothing until the import.
      const second = makeHarness(memoryStore());
      second.viewer.loadBundle(loadFixture("unicode"));
      expect(second.viewer.state!.judgments.size).toBe(0);
      second.viewer.importReport(JSON.parse(JSON.stringify(report)));
      expect(second.viewer.state!.judgments).toEqual(first.viewer.state!.judgments);

      const reExported = second.viewer.exportReport();
      expect(reExported.judgments).toEqual(report.judgments);
      expect(reExported.complete).toBe(true);
    });
  });
});
