/** Byte-offset arithmetic: UTF-8 offsets into UTF-16 strings. */

import { describe, expect, it } from "vitest";
import { ByteIndex, utf8Length } from "../src/bytes.js";
import { choice, randomInt, seededRng } from "./helpers.js";

const SAMPLES: [string, number][] = [
  ["", 0],
  ["plain ascii", 11],
  ["é", 2], // two-byte
  ["张", 3], // three-byte
  ["💚", 4], // four-byte, astral (two UTF-16 units)
  ["Émile — 张伟 💚", 22],
];

describe("utf8Length", () => {
  it("counts bytes per code-point width", () => {
    for (const [text, bytes] of SAMPLES) {
      expect(utf8Length(text), JSON.stringify(text)).toBe(bytes);
    }
    for (const [text] of SAMPLES) {
      expect(utf8Length(text)).toBe(new TextEncoder().encode(text).length);
    }
  });
});

describe("ByteIndex", () => {
  it("maps boundary byte offsets to string indices", () => {
    const index = new ByteIndex("aé张💚z");
    // bytes: a=1, é=2, 张=3, 💚=4, z=1 → boundaries 0,1,3,6,10,11
    expect(index.byteLength).toBe(11);
    expect(index.charIndexAt(0)).toBe(0);
    expect(index.charIndexAt(1)).toBe(1);
    expect(index.charIndexAt(3)).toBe(2);
    expect(index.charIndexAt(6)).toBe(3);
    expect(index.charIndexAt(10)).toBe(5); // astral char took two UTF-16 units
    expect(index.charIndexAt(11)).toBe(6);
  });

  it("slices between byte offsets", () => {
    const index = new ByteIndex("aé张💚z");
    expect(index.slice(0, 1)).toBe("a");
    expect(index.slice(1, 3)).toBe("é");
    expect(index.slice(3, 6)).toBe("张");
    expect(index.slice(6, 10)).toBe("💚");
    expect(index.slice(1, 11)).toBe("é张💚z");
    expect(index.slice(6, 6)).toBe("");
  });

  it("rejects offsets that split a character or leave the text", () => {
    const index = new ByteIndex("é💚");
    expect(() => index.charIndexAt(1)).toThrow(RangeError);
    expect(() => index.charIndexAt(3)).toThrow(RangeError);
    expect(() => index.charIndexAt(-1)).toThrow(RangeError);
    expect(() => index.charIndexAt(7)).toThrow(RangeError);
  });

  it("matches a TextEncoder/TextDecoder oracle on random slices", () => {
    const rng = seededRng(90125);
    const pool = ["a", "b", " ", "é", "ß", "张", "景", "—", "💚", "𝔘", "\n", "7"];
    const encoder = new TextEncoder();
    const decoder = new TextDecoder();
    for (let round = 0; round < 200; round++) {
      const length = randomInt(rng, 30);
      let text = "";
      const boundaries = [0];
      for (let i = 0; i < length; i++) {
        const ch = choice(rng, pool);
        text += ch;
        boundaries.push(boundaries[boundaries.length - 1] + encoder.encode(ch).length);
      }
      const index = new ByteIndex(text);
      expect(index.byteLength).toBe(boundaries[boundaries.length - 1]);
      for (let trial = 0; trial < 5; trial++) {
        const a = choice(rng, boundaries);
        const b = choice(rng, boundaries);
        const [start, end] = a <= b ? [a, b] : [b, a];
        const expected = decoder.decode(encoder.encode(text).subarray(start, end));
        expect(index.slice(start, end)).toBe(expected);
      }
    }
  });
});
