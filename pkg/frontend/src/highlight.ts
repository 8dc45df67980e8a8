/**
 * Passage rendering with answer-span highlighting.
 *
 * The passage lives in a single text node, so DOM selection offsets are
 * UTF-16 indices straight into the passage string; conversion to code
 * points happens in one place (offsets.ts). Mouse selections are read from
 * window.getSelection; tests can call selectUtf16Range directly.
 */

import { SpanSelection, codePointToUtf16, spanFromUtf16 } from "./offsets.js";

export class PassageHighlighter {
  readonly element: HTMLElement;
  private passage: string;
  private selection: SpanSelection | null = null;
  private listeners: Array<(span: SpanSelection | null) => void> = [];

  constructor(doc: Document, passage: string) {
    this.passage = passage;
    this.element = doc.createElement("div");
    this.element.className = "passage";
    this.element.textContent = passage;
    this.element.addEventListener("mouseup", () => this.captureDomSelection(doc));
  }

  get current(): SpanSelection | null {
    return this.selection;
  }

  onChange(listener: (span: SpanSelection | null) => void): void {
    this.listeners.push(listener);
  }

  /** Read the browser selection, if it falls inside the passage element. */
  captureDomSelection(doc: Document): void {
    const domSelection = doc.defaultView?.getSelection?.();
    if (!domSelection || domSelection.rangeCount === 0) return;
    const range = domSelection.getRangeAt(0);
    const start = this.absoluteUtf16Offset(range.startContainer, range.startOffset);
    const end = this.absoluteUtf16Offset(range.endContainer, range.endOffset);
    if (start === null || end === null) return;
    this.selectUtf16Range(start, end);
  }

  /**
   * Map a (container, offset) DOM position to a UTF-16 index into the whole
   * passage. Works after highlighting splits the passage into several text
   * nodes. Returns null for positions outside the passage element.
   */
  private absoluteUtf16Offset(container: Node, offset: number): number | null {
    if (container === this.element) {
      let total = 0;
      const children = this.element.childNodes;
      for (let index = 0; index < offset && index < children.length; index++) {
        total += (children[index].textContent ?? "").length;
      }
      return total;
    }
    let total = 0;
    for (const textNode of this.textNodes()) {
      if (textNode === container) return total + offset;
      total += (textNode.textContent ?? "").length;
    }
    return null;
  }

  private textNodes(): Node[] {
    const found: Node[] = [];
    const visit = (node: Node) => {
      if (node.nodeType === 3) {
        found.push(node);
        return;
      }
      node.childNodes.forEach(visit);
    };
    visit(this.element);
    return found;
  }

  /** Programmatic selection by UTF-16 bounds (what the DOM reports). */
  selectUtf16Range(utf16Start: number, utf16End: number): SpanSelection | null {
    this.setSelection(spanFromUtf16(this.passage, utf16Start, utf16End));
    return this.selection;
  }

  /** Programmatic selection by code-point bounds (what the server speaks). */
  selectCodePointRange(charStart: number, charEnd: number): SpanSelection | null {
    return this.selectUtf16Range(
      codePointToUtf16(this.passage, charStart),
      codePointToUtf16(this.passage, charEnd),
    );
  }

  clear(): void {
    this.setSelection(null);
  }

  private setSelection(span: SpanSelection | null): void {
    this.selection = span;
    this.render();
    for (const listener of this.listeners) listener(span);
  }

  private render(): void {
    const doc = this.element.ownerDocument;
    this.element.textContent = "";
    if (!this.selection) {
      this.element.textContent = this.passage;
      return;
    }
    const startUtf16 = codePointToUtf16(this.passage, this.selection.charStart);
    const endUtf16 = codePointToUtf16(this.passage, this.selection.charEnd);
    const before = doc.createTextNode(this.passage.slice(0, startUtf16));
    const mark = doc.createElement("mark");
    mark.textContent = this.passage.slice(startUtf16, endUtf16);
    const after = doc.createTextNode(this.passage.slice(endUtf16));
    this.element.append(before, mark, after);
  }
}
