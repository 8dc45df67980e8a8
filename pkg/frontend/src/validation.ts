/**
 * Answer validation screen: a queue of other workers' questions. The
 * validator highlights an answer for each; the server computes the match
 * and advances the queue. Authors never see their own questions (the
 * server enforces this too).
 */

import { ApiClient, QueueItem, ValidationView } from "./api.js";
import { PassageHighlighter } from "./highlight.js";

export class ValidationScreen {
  readonly root: HTMLElement;
  highlighter: PassageHighlighter | null = null;
  private doc: Document;
  private client: ApiClient;
  private validatorId: string;
  private queue: QueueItem[] = [];
  private position = 0;

  private questionLabel!: HTMLElement;
  private passageSlot!: HTMLElement;
  private statusLabel!: HTMLElement;
  private submitButton!: HTMLButtonElement;

  constructor(doc: Document, client: ApiClient, validatorId: string) {
    this.doc = doc;
    this.client = client;
    this.validatorId = validatorId;
    this.root = doc.createElement("section");
    this.root.className = "validation-screen";

    const heading = doc.createElement("h2");
    heading.textContent = "Answer validation";
    this.questionLabel = doc.createElement("p");
    this.questionLabel.className = "validation-question";
    this.passageSlot = doc.createElement("div");
    this.statusLabel = doc.createElement("p");
    this.statusLabel.className = "validation-status";
    this.submitButton = doc.createElement("button");
    this.submitButton.className = "submit-validation";
    this.submitButton.textContent = "Submit answer";
    this.submitButton.addEventListener("click", () => void this.submit());
    this.root.append(
      heading,
      this.questionLabel,
      this.passageSlot,
      this.submitButton,
      this.statusLabel,
    );
  }

  async load(part?: string): Promise<number> {
    const response = await this.client.validationQueue(this.validatorId, part);
    this.queue = response.queue;
    this.position = 0;
    await this.showCurrent();
    return this.queue.length;
  }

  get currentItem(): QueueItem | null {
    return this.queue[this.position] ?? null;
  }

  private async showCurrent(): Promise<void> {
    const item = this.currentItem;
    this.passageSlot.textContent = "";
    this.highlighter = null;
    if (!item) {
      this.questionLabel.textContent = "No questions waiting for validation.";
      this.submitButton.disabled = true;
      return;
    }
    this.submitButton.disabled = false;
    this.questionLabel.textContent =
      `(${this.position + 1}/${this.queue.length}) ${item.question_text}`;
    const passage = await this.client.getPassage(item.passage_id);
    this.highlighter = new PassageHighlighter(this.doc, passage.text);
    this.passageSlot.append(this.highlighter.element);
  }

  async submit(): Promise<ValidationView | null> {
    const item = this.currentItem;
    const span = this.highlighter?.current;
    if (!item || !span) {
      this.statusLabel.textContent = "Highlight an answer first.";
      return null;
    }
    const recorded = await this.client.submitValidation(
      item.question_id,
      this.validatorId,
      span.charStart,
      span.charEnd,
    );
    this.statusLabel.textContent = "Answer recorded.";
    this.position += 1;
    await this.showCurrent();
    return recorded;
  }
}
