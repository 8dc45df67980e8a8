/**
 * Typed client for the platform's v1 JSON API.
 *
 * Every response arrives in a versioned envelope; errors carry a stable
 * code plus a retryable flag. A retryable failure (the model endpoint is
 * down) must be surfaced to the user for resubmission, never swallowed.
 */

export interface ApiErrorBody {
  code: string;
  message: string;
  retryable: boolean;
}

export class ApiError extends Error {
  code: string;
  retryable: boolean;
  status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.retryable = body.retryable;
    this.status = status;
  }
}

export interface WorkerView {
  id: string;
  state: string;
  completed_hits: number;
  reviewed_ok: number;
  reviewed_total: number;
  answerable: number;
  answer_validated_total: number;
}

export interface PassageView {
  id: string;
  title: string;
  text: string;
  split: string;
}

export interface SpanView {
  char_start: number;
  char_end: number;
  text: string;
}

export interface AttemptView {
  question_text: string;
  human_span: SpanView;
  model_answer: string;
  f1: number;
  em: boolean;
  model_win: boolean;
  outcome: "beaten" | "not_beaten";
  retained: boolean;
  question_id: string | null;
  timestamp: string;
}

export interface VerdictView extends AttemptView {
  attempt_count: number;
  retained_count: number;
  remaining: number;
}

export interface HitView {
  id: string;
  worker_id: string;
  passage_id: string;
  adversary_id: string;
  split: string;
  state: string;
  pay_usd: number;
  max_questions: number;
  retained: string[];
  attempts: AttemptView[];
  flagged_for_review: boolean;
}

export interface ValidationView {
  question_id: string;
  validator_id: string;
  answer_span: SpanView;
  f1: number;
  match: boolean;
}

export interface QueueItem {
  question_id: string;
  question_text: string;
  passage_id: string;
}

export interface HealthView {
  status: string;
  adversaries: string[];
}

export interface AnswerabilityReport {
  part: string;
  total_questions: number;
  answerable_questions: number;
  answerability_rate: number;
  dropped_question_ids: string[];
  discarded_worker_ids: string[];
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ClientOptions {
  baseUrl: string;
  token?: string;
  fetchImpl?: FetchLike;
}

export class ApiClient {
  private baseUrl: string;
  private token?: string;
  private fetchImpl: FetchLike;

  constructor(options: ClientOptions) {
    this.baseUrl = options.baseUrl.replace(/\/$/, "");
    this.token = options.token;
    this.fetchImpl = options.fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const envelope = (await response.json()) as {
      v: string;
      data?: T;
      error?: ApiErrorBody;
    };
    if (!response.ok || envelope.error) {
      throw new ApiError(
        response.status,
        envelope.error ?? {
          code: "unknown",
          message: `HTTP ${response.status}`,
          retryable: false,
        },
      );
    }
    return envelope.data as T;
  }

  health(): Promise<HealthView> {
    return this.request("GET", "/api/health");
  }

  getWorker(workerId: string): Promise<WorkerView> {
    return this.request("GET", `/api/workers/${workerId}`);
  }

  submitTraining(workerId: string, artifacts: object[]): Promise<WorkerView> {
    return this.request("POST", `/api/workers/${workerId}/training`, { artifacts });
  }

  getPassage(passageId: string): Promise<PassageView> {
    return this.request("GET", `/api/passages/${passageId}`);
  }

  openHit(workerId: string, adversaryId: string, split: string): Promise<HitView> {
    return this.request("POST", "/api/hits/generation", {
      worker_id: workerId,
      adversary_id: adversaryId,
      split,
    });
  }

  getHit(hitId: string): Promise<HitView> {
    return this.request("GET", `/api/hits/${hitId}`);
  }

  submitQuestion(
    hitId: string,
    questionText: string,
    charStart: number,
    charEnd: number,
  ): Promise<VerdictView> {
    return this.request("POST", `/api/hits/${hitId}/questions`, {
      question_text: questionText,
      char_start: charStart,
      char_end: charEnd,
    });
  }

  completeHit(hitId: string): Promise<HitView> {
    return this.request("POST", `/api/hits/${hitId}/complete`);
  }

  validationQueue(validatorId: string, part?: string): Promise<{ queue: QueueItem[] }> {
    const query = part
      ? `?validator_id=${encodeURIComponent(validatorId)}&part=${part}`
      : `?validator_id=${encodeURIComponent(validatorId)}`;
    return this.request("GET", `/api/validation/queue${query}`);
  }

  submitValidation(
    questionId: string,
    validatorId: string,
    charStart: number,
    charEnd: number,
  ): Promise<ValidationView> {
    return this.request("POST", `/api/validation/${questionId}/answers`, {
      validator_id: validatorId,
      char_start: charStart,
      char_end: charEnd,
    });
  }

  stats(): Promise<Record<string, unknown>> {
    return this.request("GET", "/api/stats");
  }

  // admin surface

  registerWorker(
    workerId: string,
    country: string,
    approvalRate: number,
    lifetimeHits: number,
  ): Promise<WorkerView> {
    return this.request("POST", "/api/admin/workers", {
      worker_id: workerId,
      country,
      approval_rate: approvalRate,
      lifetime_hits: lifetimeHits,
    });
  }

  listWorkers(): Promise<{ workers: WorkerView[] }> {
    return this.request("GET", "/api/admin/workers");
  }

  qualifyWorker(workerId: string, approved: boolean): Promise<WorkerView> {
    return this.request("POST", `/api/admin/workers/${workerId}/qualify`, { approved });
  }

  reviewSample(workerId: string): Promise<{ hit_ids: string[] }> {
    return this.request("GET", `/api/admin/workers/${workerId}/review-sample`);
  }

  recordReview(workerId: string, hitId: string, verdict: "ok" | "bad"): Promise<WorkerView> {
    return this.request("POST", `/api/admin/workers/${workerId}/review`, {
      hit_id: hitId,
      verdict,
    });
  }

  reviewDue(): Promise<{ worker_ids: string[] }> {
    return this.request("GET", "/api/admin/review-due");
  }

  runAnswerability(part: string): Promise<AnswerabilityReport> {
    return this.request("POST", "/api/admin/answerability", { part });
  }

  addPassage(id: string, title: string, text: string, split: string): Promise<PassageView> {
    return this.request("POST", "/api/admin/passages", { id, title, text, split });
  }
}
