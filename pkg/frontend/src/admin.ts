/**
 * Admin review screen: qualification verdicts, sampled HIT review with
 * ok/bad verdicts, answerability runs, and live platform counters.
 */

import { ApiClient } from "./api.js";

export class AdminScreen {
  readonly root: HTMLElement;
  private doc: Document;
  private client: ApiClient;
  private workerTable!: HTMLElement;
  private statsBox!: HTMLElement;
  private reportBox!: HTMLElement;

  constructor(doc: Document, client: ApiClient) {
    this.doc = doc;
    this.client = client;
    this.root = doc.createElement("section");
    this.root.className = "admin-screen";

    const heading = doc.createElement("h2");
    heading.textContent = "Administration";
    this.statsBox = doc.createElement("pre");
    this.statsBox.className = "stats-box";
    this.workerTable = doc.createElement("div");
    this.workerTable.className = "worker-table";
    this.reportBox = doc.createElement("p");
    this.reportBox.className = "report-box";

    const answerability = doc.createElement("button");
    answerability.textContent = "Run dev answerability";
    answerability.addEventListener("click", () => void this.runAnswerability("dev"));

    this.root.append(heading, this.statsBox, this.workerTable, answerability, this.reportBox);
  }

  async refresh(): Promise<void> {
    const [stats, workers, due] = await Promise.all([
      this.client.stats(),
      this.client.listWorkers(),
      this.client.reviewDue(),
    ]);
    this.statsBox.textContent = JSON.stringify(stats, null, 2);
    this.workerTable.textContent = "";
    const dueSet = new Set(due.worker_ids);
    for (const worker of workers.workers) {
      const row = this.doc.createElement("div");
      row.className = "worker-row";
      const label = this.doc.createElement("span");
      label.textContent =
        `${worker.id} [${worker.state}] hits=${worker.completed_hits} ` +
        `review=${worker.reviewed_ok}/${worker.reviewed_total}` +
        (dueSet.has(worker.id) ? " (review due)" : "");
      row.append(label);
      if (worker.state === "in_training") {
        row.append(
          this.actionButton("approve", () =>
            this.client.qualifyWorker(worker.id, true),
          ),
          this.actionButton("reject", () =>
            this.client.qualifyWorker(worker.id, false),
          ),
        );
      }
      if (worker.state === "qualified" && worker.completed_hits > 0) {
        row.append(
          this.actionButton("review sample", async () => {
            const sample = await this.client.reviewSample(worker.id);
            this.reportBox.textContent =
              `Review for ${worker.id}: ${sample.hit_ids.join(", ")}`;
          }),
        );
      }
      this.workerTable.append(row);
    }
  }

  async recordVerdict(workerId: string, hitId: string, verdict: "ok" | "bad"): Promise<void> {
    await this.client.recordReview(workerId, hitId, verdict);
    await this.refresh();
  }

  async runAnswerability(part: string): Promise<void> {
    const report = await this.client.runAnswerability(part);
    this.reportBox.textContent =
      `${report.part}: ${report.answerable_questions}/${report.total_questions} answerable ` +
      `(${(report.answerability_rate * 100).toFixed(1)}%), ` +
      `dropped ${report.dropped_question_ids.length}, ` +
      `discarded workers: ${report.discarded_worker_ids.join(", ") || "none"}`;
    await this.refresh();
  }

  private actionButton(label: string, action: () => Promise<unknown>): HTMLButtonElement {
    const button = this.doc.createElement("button");
    button.textContent = label;
    button.addEventListener("click", () => void action().then(() => this.refresh()));
    return button;
  }
}
