/**
 * Question generation screen: the adversarial loop.
 *
 * The worker reads the passage, writes a question, highlights the answer,
 * and submits. The model's answer and the win/lose verdict render after the
 * server round trip; nothing is marked retained until the server confirms
 * the model lost. Remote-model outages show a retry banner.
 */

import { ApiClient, ApiError, HitView, VerdictView } from "./api.js";
import { PassageHighlighter } from "./highlight.js";

export class GenerationScreen {
  readonly root: HTMLElement;
  highlighter!: PassageHighlighter;
  private doc: Document;
  private client: ApiClient;
  private workerId: string;
  private hit!: HitView;

  private questionInput!: HTMLTextAreaElement;
  private selectionLabel!: HTMLElement;
  private verdictBox!: HTMLElement;
  private attemptLog!: HTMLElement;
  private progress!: HTMLElement;
  private banner!: HTMLElement;
  private submitButton!: HTMLButtonElement;
  private completeButton!: HTMLButtonElement;
  private onComplete: (hit: HitView) => void;

  constructor(
    doc: Document,
    client: ApiClient,
    workerId: string,
    onComplete: (hit: HitView) => void = () => {},
  ) {
    this.doc = doc;
    this.client = client;
    this.workerId = workerId;
    this.onComplete = onComplete;
    this.root = doc.createElement("section");
    this.root.className = "generation-screen";
  }

  async open(adversaryId: string, split: string): Promise<HitView> {
    this.hit = await this.client.openHit(this.workerId, adversaryId, split);
    await this.render();
    return this.hit;
  }

  /** Resume an existing open HIT (refresh-safe: state comes from server). */
  async resume(hitId: string): Promise<HitView> {
    this.hit = await this.client.getHit(hitId);
    await this.render();
    return this.hit;
  }

  private async render(): Promise<void> {
    const doc = this.doc;
    this.root.textContent = "";

    const passage = await this.client.getPassage(this.hit.passage_id);
    const heading = doc.createElement("h2");
    heading.textContent = `Beat the model: ${passage.title}`;
    this.root.append(heading);

    this.banner = doc.createElement("div");
    this.banner.className = "banner hidden";
    this.root.append(this.banner);

    this.highlighter = new PassageHighlighter(doc, passage.text);
    this.root.append(this.highlighter.element);

    this.selectionLabel = doc.createElement("p");
    this.selectionLabel.className = "selection-label";
    this.selectionLabel.textContent = "Highlight the answer in the passage.";
    this.highlighter.onChange((span) => {
      this.selectionLabel.textContent = span
        ? `Answer: "${span.text}"`
        : "Highlight the answer in the passage.";
    });
    this.root.append(this.selectionLabel);

    this.questionInput = doc.createElement("textarea");
    this.questionInput.className = "question-input";
    this.questionInput.placeholder = "Ask a question the model cannot answer";
    this.root.append(this.questionInput);

    this.submitButton = doc.createElement("button");
    this.submitButton.className = "submit-question";
    this.submitButton.textContent = "Submit to the model";
    this.submitButton.addEventListener("click", () => void this.submit());
    this.root.append(this.submitButton);

    this.verdictBox = doc.createElement("div");
    this.verdictBox.className = "verdict hidden";
    this.root.append(this.verdictBox);

    this.progress = doc.createElement("p");
    this.progress.className = "progress";
    this.root.append(this.progress);

    this.attemptLog = doc.createElement("ol");
    this.attemptLog.className = "attempt-log";
    this.root.append(this.attemptLog);

    this.completeButton = doc.createElement("button");
    this.completeButton.className = "complete-hit";
    this.completeButton.textContent = "Finish this task";
    this.completeButton.addEventListener("click", () => void this.complete());
    this.root.append(this.completeButton);

    for (const attempt of this.hit.attempts) {
      this.appendAttemptRow(attempt.outcome, attempt.question_text);
    }
    this.updateProgress(this.hit.retained.length);
  }

  async submit(): Promise<VerdictView | null> {
    const span = this.highlighter.current;
    const question = this.questionInput.value.trim();
    if (!span || !question) {
      this.showBanner("Write a question and highlight its answer first.");
      return null;
    }
    this.hideBanner();
    this.submitButton.disabled = true;
    try {
      const verdict = await this.client.submitQuestion(
        this.hit.id,
        question,
        span.charStart,
        span.charEnd,
      );
      this.renderVerdict(verdict);
      this.appendAttemptRow(verdict.outcome, question);
      this.updateProgress(verdict.retained_count);
      if (verdict.retained) {
        this.questionInput.value = "";
        this.highlighter.clear();
      }
      return verdict;
    } catch (error) {
      if (error instanceof ApiError && error.retryable) {
        this.showBanner(
          "The model is temporarily unreachable. Your question was NOT " +
            "counted; please submit it again.",
        );
        return null;
      }
      throw error;
    } finally {
      this.submitButton.disabled = false;
    }
  }

  async complete(): Promise<HitView> {
    const hit = await this.client.completeHit(this.hit.id);
    this.hit = hit;
    this.progress.textContent = `Task complete: ${hit.retained.length} question(s) kept.`;
    this.onComplete(hit);
    return hit;
  }

  private renderVerdict(verdict: VerdictView): void {
    this.verdictBox.classList.remove("hidden");
    this.verdictBox.classList.toggle("beaten", verdict.outcome === "beaten");
    const percent = (verdict.f1 * 100).toFixed(0);
    this.verdictBox.textContent =
      verdict.outcome === "beaten"
        ? `You beat the model! It answered "${verdict.model_answer}" ` +
          `(overlap ${percent}%). Question kept.`
        : `The model got it: "${verdict.model_answer}" (overlap ${percent}%). ` +
          "Try rephrasing or asking something harder.";
  }

  private appendAttemptRow(outcome: string, question: string): void {
    const row = this.doc.createElement("li");
    row.className = `attempt ${outcome}`;
    row.textContent = `${outcome === "beaten" ? "kept" : "rejected"}: ${question}`;
    this.attemptLog.append(row);
  }

  private updateProgress(retainedCount: number): void {
    this.progress.textContent =
      `${retainedCount} / ${this.hit.max_questions} questions kept ` +
      "(finish whenever you like; three or more is ideal).";
  }

  private showBanner(message: string): void {
    this.banner.textContent = message;
    this.banner.classList.remove("hidden");
  }

  private hideBanner(): void {
    this.banner.classList.add("hidden");
  }
}
