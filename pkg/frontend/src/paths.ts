/**
 * Canonical data-path text, e.g. `data.states[2].name` or
 * `data['50DayMovingAverage']`.
 *
 * Bundles identify referenced document fields by this textual form:
 * identifier-shaped keys are written bare (dotted after the first segment),
 * list indices in brackets, and any other key as a single-quoted bracketed
 * string with `\\` and `\'` escapes. This module formats segment lists into
 * that form and parses it back, so tree nodes and span references can be
 * matched exactly.
 */

export type PathSegment = string | number;

/** Keys that may be written without quoting. */
export const IDENT_RE = /^[A-Za-z_][A-Za-z0-9_]*$/;

function quoteKey(key: string): string {
  const escaped = key.replace(/\\/g, "\\\\").replace(/'/g, "\\'");
  return `['${escaped}']`;
}

/** Canonical text for a segment list. */
export function pathText(segments: readonly PathSegment[]): string {
  let out = "";
  segments.forEach((seg, i) => {
    if (typeof seg === "number") {
      out += `[${seg}]`;
    } else if (IDENT_RE.test(seg)) {
      out += i === 0 ? seg : `.${seg}`;
    } else {
      out += quoteKey(seg);
    }
  });
  return out;
}

/** Parse canonical path text back into segments. Throws on malformed input. */
export function parsePathText(text: string): PathSegment[] {
  const segments: PathSegment[] = [];
  let pos = 0;

  function fail(detail: string): never {
    throw new Error(`bad path ${JSON.stringify(text)} at offset ${pos}: ${detail}`);
  }

  function readIdent(): string {
    const match = /^[A-Za-z_][A-Za-z0-9_]*/.exec(text.slice(pos));
    if (!match) fail("expected identifier");
    pos += match[0].length;
    return match[0];
  }

  function readBracket(): PathSegment {
    pos += 1; // consume '['
    if (text[pos] === "'") {
      pos += 1;
      let key = "";
      for (;;) {
        const ch = text[pos];
        if (ch === undefined) fail("unterminated quoted key");
        if (ch === "\\") {
          const next = text[pos + 1];
          if (next !== "\\" && next !== "'") fail(`invalid escape \\${next ?? ""}`);
          key += next;
          pos += 2;
        } else if (ch === "'") {
          pos += 1;
          break;
        } else {
          key += ch;
          pos += 1;
        }
      }
      if (text[pos] !== "]") fail("expected ']' after quoted key");
      pos += 1;
      return key;
    }
    const match = /^-?\d+/.exec(text.slice(pos));
    if (!match) fail("expected integer index or quoted key");
    pos += match[0].length;
    if (text[pos] !== "]") fail("expected ']' after index");
    pos += 1;
    return parseInt(match[0], 10);
  }

  // First segment: bare identifier or bracketed form.
  if (text[pos] === "[") {
    segments.push(readBracket());
  } else {
    segments.push(readIdent());
  }

  while (pos < text.length) {
    if (text[pos] === ".") {
      pos += 1;
      segments.push(readIdent());
    } else if (text[pos] === "[") {
      segments.push(readBracket());
    } else {
      fail("expected '.' or '['");
    }
  }
  return segments;
}
