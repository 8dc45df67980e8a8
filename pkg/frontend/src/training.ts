/**
 * Training and qualification screen.
 *
 * Five exercises (two question-for-answer, two answer-for-question, one
 * full pair) plus one sample generation task, submitted together for admin
 * review. Incomplete exercises are flagged inline before anything is sent.
 */

import { ApiClient, WorkerView } from "./api.js";

interface Exercise {
  kind: string;
  prompt: string;
  input: HTMLTextAreaElement;
}

export const EXERCISES: Array<{ kind: string; prompt: string }> = [
  {
    kind: "question_for_answer",
    prompt: "Write a question whose answer is the highlighted text (1 of 2)",
  },
  {
    kind: "question_for_answer",
    prompt: "Write a question whose answer is the highlighted text (2 of 2)",
  },
  {
    kind: "answer_for_question",
    prompt: "Paste the passage snippet answering the given question (1 of 2)",
  },
  {
    kind: "answer_for_question",
    prompt: "Paste the passage snippet answering the given question (2 of 2)",
  },
  {
    kind: "full_pair",
    prompt: "Write one full question and its answer snippet",
  },
  {
    kind: "sample_hit",
    prompt: "Describe your sample adversarial question and its answer",
  },
];

export class TrainingScreen {
  readonly root: HTMLElement;
  private client: ApiClient;
  private workerId: string;
  private exercises: Exercise[] = [];
  private statusLabel: HTMLElement;

  constructor(doc: Document, client: ApiClient, workerId: string) {
    this.client = client;
    this.workerId = workerId;
    this.root = doc.createElement("section");
    this.root.className = "training-screen";

    const heading = doc.createElement("h2");
    heading.textContent = "Training and qualification";
    this.root.append(heading);

    for (const exerciseSpec of EXERCISES) {
      const wrapper = doc.createElement("div");
      wrapper.className = "exercise";
      const label = doc.createElement("label");
      label.textContent = exerciseSpec.prompt;
      const input = doc.createElement("textarea");
      input.dataset.kind = exerciseSpec.kind;
      wrapper.append(label, input);
      this.root.append(wrapper);
      this.exercises.push({ kind: exerciseSpec.kind, prompt: exerciseSpec.prompt, input });
    }

    const submit = doc.createElement("button");
    submit.className = "submit-training";
    submit.textContent = "Submit for review";
    submit.addEventListener("click", () => void this.submit());
    this.statusLabel = doc.createElement("p");
    this.statusLabel.className = "training-status";
    this.root.append(submit, this.statusLabel);
  }

  fill(values: string[]): void {
    values.forEach((value, index) => {
      if (this.exercises[index]) this.exercises[index].input.value = value;
    });
  }

  incompleteExercises(): Exercise[] {
    return this.exercises.filter((exercise) => !exercise.input.value.trim());
  }

  async submit(): Promise<WorkerView | null> {
    const incomplete = this.incompleteExercises();
    for (const exercise of this.exercises) {
      exercise.input.classList.toggle(
        "incomplete",
        !exercise.input.value.trim(),
      );
    }
    if (incomplete.length > 0) {
      this.statusLabel.textContent =
        `${incomplete.length} exercise(s) still empty; complete them all.`;
      return null;
    }
    const artifacts = this.exercises.map((exercise) => ({
      kind: exercise.kind,
      response: exercise.input.value.trim(),
    }));
    const worker = await this.client.submitTraining(this.workerId, artifacts);
    this.statusLabel.textContent =
      "Submitted. An administrator will review your work shortly.";
    return worker;
  }
}
