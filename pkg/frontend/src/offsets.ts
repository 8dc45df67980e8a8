/**
 * Code-point offset utilities.
 *
 * The server addresses answer spans by Unicode code points, while DOM APIs
 * (selections, string slicing) work in UTF-16 units. Every span that leaves
 * the browser goes through these converters so astral-plane characters
 * (emoji, rare CJK) never skew offsets.
 */

export function codePointLength(text: string): number {
  let count = 0;
  for (const _ of text) count += 1;
  return count;
}

/** UTF-16 index -> code-point index. Clamps to the string length. */
export function utf16ToCodePoint(text: string, utf16Index: number): number {
  let codePoints = 0;
  let units = 0;
  for (const ch of text) {
    if (units >= utf16Index) break;
    units += ch.length;
    codePoints += 1;
  }
  return codePoints;
}

/** Code-point index -> UTF-16 index. Clamps to the string length. */
export function codePointToUtf16(text: string, codePointIndex: number): number {
  let codePoints = 0;
  let units = 0;
  for (const ch of text) {
    if (codePoints >= codePointIndex) break;
    units += ch.length;
    codePoints += 1;
  }
  return units;
}

/** Substring by code-point offsets, matching server-side slicing. */
export function sliceByCodePoint(text: string, start: number, end: number): string {
  return text.slice(codePointToUtf16(text, start), codePointToUtf16(text, end));
}

export interface SpanSelection {
  charStart: number;
  charEnd: number;
  text: string;
}

/**
 * Build a span from UTF-16 bounds within the passage, converting to code
 * points and echoing back the exact covered text.
 */
export function spanFromUtf16(
  passage: string,
  utf16Start: number,
  utf16End: number,
): SpanSelection | null {
  if (utf16End <= utf16Start) return null;
  const charStart = utf16ToCodePoint(passage, utf16Start);
  const charEnd = utf16ToCodePoint(passage, utf16End);
  if (charEnd <= charStart) return null;
  return { charStart, charEnd, text: sliceByCodePoint(passage, charStart, charEnd) };
}
