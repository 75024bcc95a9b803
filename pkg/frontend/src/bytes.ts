/**
 * UTF-8 byte-offset arithmetic over JavaScript strings.
 *
 * Span offsets in a provenance bundle count UTF-8 bytes, while DOM strings
 * are UTF-16. A ByteIndex is built once per text and converts byte offsets
 * to string indices so spans can be sliced without ever splitting a
 * character.
 */

/** Number of UTF-8 bytes needed for one code point. */
function utf8Width(codePoint: number): number {
  if (codePoint < 0x80) return 1;
  if (codePoint < 0x800) return 2;
  if (codePoint < 0x10000) return 3;
  return 4;
}

/** Total UTF-8 byte length of a string. */
export function utf8Length(text: string): number {
  let bytes = 0;
  for (const ch of text) {
    bytes += utf8Width(ch.codePointAt(0)!);
  }
  return bytes;
}

export class ByteIndex {
  readonly text: string;
  readonly byteLength: number;
  /** Byte offset where code point i starts; one entry per code point. */
  private readonly byteStarts: number[];
  /** String (UTF-16) index where code point i starts. */
  private readonly charStarts: number[];

  constructor(text: string) {
    this.text = text;
    this.byteStarts = [];
    this.charStarts = [];
    let byteOffset = 0;
    let charOffset = 0;
    for (const ch of text) {
      this.byteStarts.push(byteOffset);
      this.charStarts.push(charOffset);
      byteOffset += utf8Width(ch.codePointAt(0)!);
      charOffset += ch.length; // 2 for astral code points, else 1
    }
    this.byteLength = byteOffset;
  }

  /**
   * String index corresponding to a byte offset. The offset must land on a
   * code-point boundary (all bundle offsets do); anything else is corrupt
   * input and raises RangeError.
   */
  charIndexAt(byteOffset: number): number {
    if (byteOffset === this.byteLength) return this.text.length;
    if (byteOffset < 0 || byteOffset > this.byteLength) {
      throw new RangeError(`byte offset ${byteOffset} outside text of ${this.byteLength} bytes`);
    }
    // Binary search for an exact boundary match.
    let lo = 0;
    let hi = this.byteStarts.length - 1;
    while (lo <= hi) {
      const mid = (lo + hi) >> 1;
      const start = this.byteStarts[mid];
      if (start === byteOffset) return this.charStarts[mid];
      if (start < byteOffset) lo = mid + 1;
      else hi = mid - 1;
    }
    throw new RangeError(`byte offset ${byteOffset} is not a code-point boundary`);
  }

  /** Substring between two byte offsets (both must be boundaries). */
  slice(startByte: number, endByte: number): string {
    return this.text.slice(this.charIndexAt(startByte), this.charIndexAt(endByte));
  }
}
