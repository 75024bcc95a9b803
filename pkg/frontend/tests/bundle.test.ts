/** Bundle validation: accept real exports, reject structural damage. */

import { describe, expect, it } from "vitest";
import { BundleError, bundleFromFiles, parseBundle, parseProvenance } from "../src/bundle.js";
import {
  FIXTURE_NAMES,
  fixtureJson,
  fixtureText,
  loadFixture,
  rawProvenance,
} from "./helpers.js";

describe("parseBundle on exported fixtures", () => {
  it("accepts every fixture bundle", () => {
    for (const name of FIXTURE_NAMES) {
      const bundle = loadFixture(name);
      expect(bundle.id).toBe(name);
      expect(bundle.provenance.schema_version).toBe("symgen_provenance_v1");
    }
  });

  it("exposes typed span fields", () => {
    const bundle = loadFixture("arith");
    expect(bundle.provenance.spans).toHaveLength(1);
    const span = bundle.provenance.spans[0];
    expect(span.expr_source).toBe("data.pts_qtr1 + data.pts_qtr2");
    expect(span.referenced_paths).toEqual(["data.pts_qtr1", "data.pts_qtr2"]);
    expect(span.value_rendered).toBe("42");
    expect(span.status).toBe("ok");
  });

  it("falls back to a placeholder id without meta.json", () => {
    const bundle = parseBundle({
      provenance: fixtureJson("ohio", "provenance.json"),
      document: fixtureJson("ohio", "data.json"),
    });
    expect(bundle.id).toBe("(unnamed bundle)");
    expect(bundle.meta).toBeNull();
  });

  it("rejects a non-object document", () => {
    expect(() =>
      parseBundle({ provenance: fixtureJson("ohio", "provenance.json"), document: [1, 2] }),
    ).toThrow(BundleError);
  });
});

describe("parseProvenance rejection", () => {
  function tampered(mutate: (prov: Record<string, unknown>) => void): () => void {
    const prov = rawProvenance("unicode");
    mutate(prov);
    return () => parseProvenance(prov);
  }

  it("rejects a different schema version", () => {
    expect(tampered((p) => (p.schema_version = "symgen_provenance_v2"))).toThrow(
      /schema_version/,
    );
  });

  it("rejects missing and unknown fields", () => {
    expect(tampered((p) => delete p.text)).toThrow(/missing field "text"/);
    expect(tampered((p) => (p.surprise = 1))).toThrow(/unknown field "surprise"/);
    expect(
      tampered((p) => {
        const spans = p.spans as Record<string, unknown>[];
        delete spans[0].status;
      }),
    ).toThrow(/missing field "status"/);
  });

  it("rejects bad enum values", () => {
    expect(
      tampered((p) => ((p.spans as Record<string, unknown>[])[0].status = "maybe")),
    ).toThrow(/status/);
    const withError = rawProvenance("errors");
    (withError.local_errors as Record<string, unknown>[])[0].cause = "gremlins";
    expect(() => parseProvenance(withError)).toThrow(/unknown cause/);
  });

  it("rejects spans that leave the text or overlap", () => {
    expect(
      tampered((p) => ((p.spans as Record<string, unknown>[])[0].end = 10_000)),
    ).toThrow(/beyond text/);
    expect(
      tampered((p) => {
        const spans = p.spans as { start: number; end: number }[];
        spans[1].start = spans[0].end - 1;
      }),
    ).toThrow(/not on a character boundary|overlaps/);
    expect(
      tampered((p) => {
        const spans = p.spans as { start: number; end: number }[];
        spans[1].start = spans[0].start;
        spans[1].end = spans[0].end;
      }),
    ).toThrow(/overlaps/);
  });

  it("rejects offsets inside a multi-byte character", () => {
    // unicode fixture: first span starts at byte 11, right after "Émile — ";
    // byte 12 falls inside the first character of the span value.
    expect(
      tampered((p) => {
        const spans = p.spans as { start: number; end: number }[];
        spans[0].start = 12;
      }),
    ).toThrow(/character boundary/);
  });

  it("rejects graph damage", () => {
    expect(
      tampered((p) => {
        const graph = p.graph as { edges: Record<string, unknown>[] };
        graph.edges.push({ from: "out:0", to: "ghost@1", kind: "var" });
      }),
    ).toThrow(/unknown node/);
    expect(
      tampered((p) => {
        const graph = p.graph as { nodes: Record<string, unknown>[] };
        graph.nodes[0].span_index = 99;
      }),
    ).toThrow(/span_index/);
    expect(
      tampered((p) => {
        const graph = p.graph as { nodes: Record<string, unknown>[] };
        graph.nodes.push({ ...graph.nodes[0] });
      }),
    ).toThrow(/duplicate node id/);
  });

  it("rejects a malformed global error", () => {
    expect(
      tampered((p) => (p.global_error = { message: "boom" })),
    ).toThrow(/missing field "position"/);
    expect(
      tampered((p) => (p.global_error = { message: "boom", position: 0, extra: 1 })),
    ).toThrow(/unknown field "extra"/);
  });
});

describe("bundleFromFiles", () => {
  function files(name: "ohio" | "globalerr"): { name: string; text: string }[] {
    return [
      { name: `bundles/${name}/provenance.json`, text: fixtureText(name, "provenance.json") },
      { name: `bundles/${name}/data.json`, text: fixtureText(name, "data.json") },
      { name: `bundles/${name}/meta.json`, text: fixtureText(name, "meta.json") },
    ];
  }

  it("routes files by base name and ignores extras", () => {
    const extra = { name: "bundles/index.json", text: '{"irrelevant": true}' };
    const bundle = bundleFromFiles([extra, ...files("ohio")]);
    expect(bundle.id).toBe("ohio");
    expect(bundle.provenance.text).toBe("born in Ohio");
  });

  it("requires provenance.json and data.json", () => {
    const [prov, data] = files("ohio");
    expect(() => bundleFromFiles([data])).toThrow(/no provenance\.json/);
    expect(() => bundleFromFiles([prov])).toThrow(/no data\.json/);
  });

  it("rejects two bundles selected at once", () => {
    expect(() => bundleFromFiles([...files("ohio"), ...files("globalerr")])).toThrow(
      /single bundle/,
    );
  });

  it("rejects invalid JSON with the file named", () => {
    const [prov, data] = files("ohio");
    expect(() =>
      bundleFromFiles([prov, { name: "data.json", text: "{not json" }, data].slice(0, 2)),
    ).toThrow(/data\.json is not valid JSON/);
  });
});
