"""Annotation state machines: generation HITs with the adversarial retry
loop, worker qualification and review, and answerability validation.

Every state change is a command that validates against current state, appends
one event to the log, and folds that event through a reducer. Replaying a log
folds the same reducers over the recorded payloads (model predictions
included), so rebuilt state is byte-for-byte reproducible and never re-calls
an adversary.

Commands are serialized by an engine-wide lock; the adversary call inside
submit_question runs outside it so a slow remote model never blocks unrelated
requests.
"""

from __future__ import annotations

import math
import random
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import store
from .analysis import COMPREHENSION_LABELS
from .adversary import AdversaryRegistry
from .errors import (
    DuplicateValidation,
    HitClosed,
    IllegalTransition,
    IncompleteTraining,
    InsufficientValidations,
    NoPassagesLeft,
    NotEligible,
    NotQualified,
    ReviewOfForeignHit,
    SelfValidation,
    SpanOutOfBounds,
    TooManyLabels,
    UnknownEntity,
    UnknownLabel,
)
from .events import Event, EventLog
from .metrics import AdjudicationPolicy, MatchScore, adjudicate, f1
from .store import Passage, PredictionView, QuestionRecord, Span

REVIEW_SUCCESS_THRESHOLD = 0.8
ANSWERABLE_WORKER_THRESHOLD = 0.5
REQUIRED_VALIDATIONS = 3

TRAINING_KINDS = {
    "question_for_answer": 2,
    "answer_for_question": 2,
    "full_pair": 1,
    "sample_hit": 1,
}


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def review_sample_size(n: int) -> int:
    """How many of a worker's n completed tasks get manually reviewed.

    floor(5 * log10(n) + 1), capped at n; 0 when there is nothing to review.
    Powers of ten are computed exactly so float log cannot nudge a boundary.
    """
    if n <= 0:
        return 0
    digits = len(str(n)) - 1
    if n == 10**digits:
        size = 5 * digits + 1
    else:
        size = math.floor(5 * math.log10(n) + 1)
    return min(size, n)


@dataclass(frozen=True)
class EligibilityRules:
    min_approval_rate: float = 0.98
    min_lifetime_hits: int = 1000
    countries: tuple[str, ...] = ("CA", "GB", "US")


@dataclass(frozen=True)
class Eligibility:
    country: str
    approval_rate: float
    lifetime_hits: int


@dataclass
class WorkerProfile:
    id: str
    eligibility: Eligibility
    state: str = "untrained"  # untrained | in_training | qualified | revoked
    completed_hits: int = 0
    reviewed_ok: int = 0
    reviewed_total: int = 0
    answerable: int = 0
    answer_validated_total: int = 0
    training_artifacts: list = field(default_factory=list)
    seen_passages: set[str] = field(default_factory=set)


@dataclass
class AttemptRecord:
    question_text: str
    human_span: Span
    model_prediction: PredictionView
    score: MatchScore
    retained: bool
    question_id: str | None
    timestamp: str


@dataclass
class GenerationHit:
    id: str
    worker_id: str
    passage_id: str
    adversary_id: str
    split: str
    state: str = "open"  # open | completed | discarded
    attempts: list[AttemptRecord] = field(default_factory=list)
    retained: list[str] = field(default_factory=list)
    pay_usd: float = 2.00
    max_questions: int = 5
    opened_at: str = ""
    completed_at: str | None = None
    flagged_for_review: bool = False


@dataclass(frozen=True)
class ValidationAssignment:
    question_id: str
    validator_id: str
    answer_span: Span
    f1: float
    match: bool
    timestamp: str


@dataclass(frozen=True)
class ValidationReport:
    part: str
    total_questions: int
    answerable_questions: int
    answerability_rate: float
    dropped_question_ids: tuple[str, ...]
    discarded_worker_ids: tuple[str, ...]


@dataclass(frozen=True)
class EngineConfig:
    policy: AdjudicationPolicy = AdjudicationPolicy()
    max_questions_per_hit: int = 5
    hit_pay_usd: float = 2.00
    review_batch_size: int = 10
    eligibility: EligibilityRules = EligibilityRules()
    seed: int = 0


def _span_payload(span: Span) -> dict:
    return {
        "char_start": span.char_start,
        "char_end": span.char_end,
        "text": span.text,
    }


def _span_from_payload(payload: dict) -> Span:
    return Span(payload["char_start"], payload["char_end"], payload["text"])


class Engine:
    """The annotation platform's single source of truth."""

    def __init__(
        self,
        config: EngineConfig,
        registry: AdversaryRegistry | None = None,
        log: EventLog | None = None,
    ):
        self.config = config
        self.registry = registry or AdversaryRegistry()
        self._log = log
        self._lock = threading.RLock()
        self._rng = random.Random(config.seed)

        self.workers: dict[str, WorkerProfile] = {}
        self.passages: dict[str, Passage] = {}
        self.passage_splits: dict[str, str] = {}
        self.hits: dict[str, GenerationHit] = {}
        self.questions: dict[str, QuestionRecord] = {}
        self.validations: dict[str, list[ValidationAssignment]] = {}
        self.answerability_passed: set[str] = set()
        self.answerability_reports: dict[str, ValidationReport] = {}
        self._hit_counter = 0
        self._question_counter = 0

        if log is not None:
            for event in log.events():
                self._fold(event)

    def close(self) -> None:
        """Flush and close the backing event log, if any."""
        if self._log is not None:
            self._log.close()

    @classmethod
    def from_events(
        cls,
        events: Iterable[Event],
        config: EngineConfig,
        registry: AdversaryRegistry | None = None,
    ) -> "Engine":
        engine = cls(config, registry=registry)
        for event in events:
            engine._fold(event)
        return engine

    # ------------------------------------------------------------------
    # command plumbing

    def _commit(self, kind: str, payload: dict) -> Event:
        if self._log is not None:
            event = self._log.append(kind, payload)
        else:
            event = Event(seq=0, timestamp=utc_now(), kind=kind, payload=payload)
        self._fold(event)
        return event

    def _fold(self, event: Event) -> None:
        reducer = getattr(self, f"_apply_{event.kind}")
        reducer(event.timestamp, event.payload)

    # ------------------------------------------------------------------
    # passages

    def add_passage(self, passage: Passage, split: str) -> Passage:
        if split not in store.SPLITS:
            raise ValueError(f"unknown split {split!r}")
        with self._lock:
            if passage.id in self.passages:
                raise IllegalTransition(f"passage {passage.id!r} already present")
            self._commit(
                "passage_added",
                {
                    "passage": {
                        "id": passage.id,
                        "title": passage.title,
                        "text": passage.text,
                    },
                    "split": split,
                },
            )
            return self.passages[passage.id]

    def _apply_passage_added(self, timestamp: str, payload: dict) -> None:
        entry = payload["passage"]
        passage = Passage(id=entry["id"], title=entry["title"], text=entry["text"])
        self.passages[passage.id] = passage
        self.passage_splits[passage.id] = payload["split"]

    def get_passage(self, passage_id: str) -> Passage:
        try:
            return self.passages[passage_id]
        except KeyError:
            raise UnknownEntity(f"unknown passage {passage_id!r}")

    # ------------------------------------------------------------------
    # workers

    def register_worker(
        self, worker_id: str, country: str, approval_rate: float, lifetime_hits: int
    ) -> WorkerProfile:
        rules = self.config.eligibility
        if country not in rules.countries:
            raise NotEligible(f"country {country!r} not in allowlist")
        if approval_rate < rules.min_approval_rate:
            raise NotEligible(
                f"approval rate {approval_rate} below {rules.min_approval_rate}"
            )
        if lifetime_hits < rules.min_lifetime_hits:
            raise NotEligible(
                f"lifetime hits {lifetime_hits} below {rules.min_lifetime_hits}"
            )
        with self._lock:
            if worker_id in self.workers:
                raise IllegalTransition(f"worker {worker_id!r} already registered")
            self._commit(
                "worker_registered",
                {
                    "worker_id": worker_id,
                    "country": country,
                    "approval_rate": approval_rate,
                    "lifetime_hits": lifetime_hits,
                },
            )
            return self.workers[worker_id]

    def _apply_worker_registered(self, timestamp: str, payload: dict) -> None:
        self.workers[payload["worker_id"]] = WorkerProfile(
            id=payload["worker_id"],
            eligibility=Eligibility(
                country=payload["country"],
                approval_rate=payload["approval_rate"],
                lifetime_hits=payload["lifetime_hits"],
            ),
        )

    def get_worker(self, worker_id: str) -> WorkerProfile:
        try:
            return self.workers[worker_id]
        except KeyError:
            raise UnknownEntity(f"unknown worker {worker_id!r}")

    def qualification_flow(
        self, worker_id: str, artifacts: Sequence[dict]
    ) -> WorkerProfile:
        """Store a worker's training submissions and queue them for review.

        Requires two question-for-answer exercises, two answer-for-question
        exercises, one full question-answer pair, and one sample generation
        HIT. An admin verdict (review_qualification) then moves the worker to
        qualified or back to untrained.
        """
        with self._lock:
            worker = self.get_worker(worker_id)
            if worker.state not in ("untrained", "in_training"):
                raise IllegalTransition(
                    f"worker {worker_id!r} cannot train from state {worker.state!r}"
                )
            counts: dict[str, int] = {}
            for artifact in artifacts:
                kind = artifact.get("kind")
                if kind not in TRAINING_KINDS:
                    raise IncompleteTraining(f"unknown training artifact {kind!r}")
                counts[kind] = counts.get(kind, 0) + 1
            missing = [
                kind
                for kind, required in TRAINING_KINDS.items()
                if counts.get(kind, 0) < required
            ]
            if missing:
                raise IncompleteTraining(
                    "missing training artifacts: " + ", ".join(sorted(missing))
                )
            self._commit(
                "training_submitted",
                {"worker_id": worker_id, "artifacts": list(artifacts)},
            )
            return worker

    def _apply_training_submitted(self, timestamp: str, payload: dict) -> None:
        worker = self.workers[payload["worker_id"]]
        worker.training_artifacts.append(payload["artifacts"])
        worker.state = "in_training"

    def review_qualification(self, worker_id: str, approved: bool) -> WorkerProfile:
        with self._lock:
            worker = self.get_worker(worker_id)
            if worker.state != "in_training":
                raise IllegalTransition(
                    f"worker {worker_id!r} has no pending qualification review"
                )
            self._commit(
                "qualification_reviewed",
                {"worker_id": worker_id, "approved": approved},
            )
            return worker

    def _apply_qualification_reviewed(self, timestamp: str, payload: dict) -> None:
        worker = self.workers[payload["worker_id"]]
        worker.state = "qualified" if payload["approved"] else "untrained"

    def revoke_worker(self, worker_id: str, reason: str) -> WorkerProfile:
        with self._lock:
            worker = self.get_worker(worker_id)
            if worker.state == "revoked":
                raise IllegalTransition(f"worker {worker_id!r} already revoked")
            self._commit(
                "worker_revoked", {"worker_id": worker_id, "reason": reason}
            )
            return worker

    def _apply_worker_revoked(self, timestamp: str, payload: dict) -> None:
        self._discard_worker_data(payload["worker_id"])

    def _discard_worker_data(self, worker_id: str) -> None:
        """Revoke the worker and discard every artifact they authored.

        Questions already dropped as unanswerable keep that status; both
        states are terminal and excluded from every export.
        """
        worker = self.workers[worker_id]
        worker.state = "revoked"
        for question in self.questions.values():
            if question.worker_id == worker_id and question.status == "retained":
                question.status = "discarded"
                self.answerability_passed.discard(question.id)
        for hit in self.hits.values():
            if hit.worker_id == worker_id and hit.state == "open":
                hit.state = "discarded"

    # ------------------------------------------------------------------
    # generation HITs

    def open_generation_hit(
        self, worker_id: str, adversary_id: str, split: str
    ) -> GenerationHit:
        if split not in store.SPLITS:
            raise ValueError(f"unknown split {split!r}")
        with self._lock:
            worker = self.get_worker(worker_id)
            if worker.state != "qualified":
                raise NotQualified(
                    f"worker {worker_id!r} is {worker.state}, not qualified"
                )
            if adversary_id not in self.registry:
                raise UnknownEntity(f"no adversary registered as {adversary_id!r}")
            pool = sorted(
                pid
                for pid, pool_split in self.passage_splits.items()
                if pool_split == split and pid not in worker.seen_passages
            )
            if not pool:
                raise NoPassagesLeft(
                    f"no unseen passages left in split {split!r} for "
                    f"worker {worker_id!r}"
                )
            passage_id = self._rng.choice(pool)
            hit_id = f"hit-{self._hit_counter + 1:05d}"
            self._commit(
                "hit_opened",
                {
                    "hit_id": hit_id,
                    "worker_id": worker_id,
                    "passage_id": passage_id,
                    "adversary_id": adversary_id,
                    "split": split,
                },
            )
            return self.hits[hit_id]

    def _apply_hit_opened(self, timestamp: str, payload: dict) -> None:
        self._hit_counter += 1
        hit = GenerationHit(
            id=payload["hit_id"],
            worker_id=payload["worker_id"],
            passage_id=payload["passage_id"],
            adversary_id=payload["adversary_id"],
            split=payload["split"],
            pay_usd=self.config.hit_pay_usd,
            max_questions=self.config.max_questions_per_hit,
            opened_at=timestamp,
        )
        self.hits[hit.id] = hit
        self.workers[hit.worker_id].seen_passages.add(hit.passage_id)

    def get_hit(self, hit_id: str) -> GenerationHit:
        try:
            return self.hits[hit_id]
        except KeyError:
            raise UnknownEntity(f"unknown hit {hit_id!r}")

    def _check_hit_accepts_questions(self, hit_id: str) -> GenerationHit:
        hit = self.get_hit(hit_id)
        if hit.state != "open":
            raise HitClosed(f"hit {hit_id!r} is {hit.state}")
        if len(hit.retained) >= hit.max_questions:
            raise HitClosed(
                f"hit {hit_id!r} already holds {hit.max_questions} retained "
                "questions"
            )
        return hit

    def submit_question(
        self, hit_id: str, question_text: str, char_start: int, char_end: int
    ) -> AttemptRecord:
        """Run one adversarial attempt: predict, adjudicate, retain or reject.

        The retained question (if any) is created atomically with the attempt
        record. A remote adversary failure propagates as a retryable error
        and leaves no trace in the log.
        """
        if not question_text.strip():
            raise ValueError("question text must be non-empty")
        with self._lock:
            hit = self._check_hit_accepts_questions(hit_id)
            passage = self.passages[hit.passage_id]
            try:
                span = Span.from_offsets(passage, char_start, char_end)
            except ValueError as exc:
                raise SpanOutOfBounds(str(exc)) from exc
            adversary = self.registry.get(hit.adversary_id)

        # Model call happens outside the lock: it may take seconds.
        prediction = adversary.predict(passage, question_text)

        with self._lock:
            hit = self._check_hit_accepts_questions(hit_id)
            score = adjudicate(span.text, prediction.text, self.config.policy)
            retained = not score.model_win
            question_id = None
            if retained:
                question_id = f"q-{self._question_counter + 1:05d}"
            self._commit(
                "attempt_recorded",
                {
                    "hit_id": hit_id,
                    "question_text": question_text,
                    "human_span": _span_payload(span),
                    "prediction": {
                        "text": prediction.text,
                        "char_start": prediction.char_start,
                        "char_end": prediction.char_end,
                        "latency_ms": prediction.latency_ms,
                        "adversary_id": prediction.adversary_id,
                    },
                    "score": {
                        "em": score.em,
                        "f1": score.f1,
                        "model_win": score.model_win,
                    },
                    "retained": retained,
                    "question_id": question_id,
                },
            )
            return self.hits[hit_id].attempts[-1]

    def _apply_attempt_recorded(self, timestamp: str, payload: dict) -> None:
        hit = self.hits[payload["hit_id"]]
        span = _span_from_payload(payload["human_span"])
        prediction = PredictionView(
            text=payload["prediction"]["text"],
            char_start=payload["prediction"]["char_start"],
            char_end=payload["prediction"]["char_end"],
            adversary_id=payload["prediction"]["adversary_id"],
        )
        score = MatchScore(
            em=payload["score"]["em"],
            f1=payload["score"]["f1"],
            model_win=payload["score"]["model_win"],
        )
        attempt = AttemptRecord(
            question_text=payload["question_text"],
            human_span=span,
            model_prediction=prediction,
            score=score,
            retained=payload["retained"],
            question_id=payload["question_id"],
            timestamp=timestamp,
        )
        hit.attempts.append(attempt)
        if payload["retained"]:
            self._question_counter += 1
            question = QuestionRecord(
                id=payload["question_id"],
                passage_id=hit.passage_id,
                worker_id=hit.worker_id,
                text=payload["question_text"],
                gold=span,
                model_answer_at_collection=prediction,
                collection_score=score,
                split=hit.split,
            )
            self.questions[question.id] = question
            hit.retained.append(question.id)

    def complete_hit(self, hit_id: str) -> GenerationHit:
        with self._lock:
            hit = self.get_hit(hit_id)
            if hit.state != "open":
                raise HitClosed(f"hit {hit_id!r} is {hit.state}")
            self._commit("hit_completed", {"hit_id": hit_id})
            return self.hits[hit_id]

    def _apply_hit_completed(self, timestamp: str, payload: dict) -> None:
        hit = self.hits[payload["hit_id"]]
        hit.state = "completed"
        hit.completed_at = timestamp
        # Zero-retained HITs are accepted but flagged for manual review.
        hit.flagged_for_review = not hit.retained
        self.workers[hit.worker_id].completed_hits += 1

    def discard_hit(self, hit_id: str, reason: str = "") -> GenerationHit:
        with self._lock:
            hit = self.get_hit(hit_id)
            if hit.state != "open":
                raise HitClosed(f"hit {hit_id!r} is {hit.state}")
            self._commit("hit_discarded", {"hit_id": hit_id, "reason": reason})
            return self.hits[hit_id]

    def _apply_hit_discarded(self, timestamp: str, payload: dict) -> None:
        self.hits[payload["hit_id"]].state = "discarded"

    # ------------------------------------------------------------------
    # manual review

    def review_sample(self, worker_id: str) -> list[str]:
        """Deterministically sample this worker's completed HITs for review.

        Sample size follows review_sample_size over completed task count;
        the draw is seeded by (engine seed, worker, count) so the same state
        always yields the same sample.
        """
        with self._lock:
            worker = self.get_worker(worker_id)
            completed = sorted(
                hit.id
                for hit in self.hits.values()
                if hit.worker_id == worker_id and hit.state == "completed"
            )
            size = review_sample_size(worker.completed_hits)
            if size >= len(completed):
                return completed
            rng = random.Random(
                f"{self.config.seed}:{worker_id}:{worker.completed_hits}"
            )
            return sorted(rng.sample(completed, size))

    def record_review(
        self, worker_id: str, hit_id: str, verdict: str
    ) -> WorkerProfile:
        if verdict not in ("ok", "bad"):
            raise ValueError(f"verdict must be 'ok' or 'bad', got {verdict!r}")
        with self._lock:
            worker = self.get_worker(worker_id)
            if worker.state != "qualified":
                raise NotQualified(
                    f"worker {worker_id!r} is {worker.state}, not qualified"
                )
            hit = self.get_hit(hit_id)
            if hit.worker_id != worker_id:
                raise ReviewOfForeignHit(
                    f"hit {hit_id!r} belongs to {hit.worker_id!r}, "
                    f"not {worker_id!r}"
                )
            self._commit(
                "review_recorded",
                {"worker_id": worker_id, "hit_id": hit_id, "verdict": verdict},
            )
            return self.workers[worker_id]

    def _apply_review_recorded(self, timestamp: str, payload: dict) -> None:
        worker = self.workers[payload["worker_id"]]
        worker.reviewed_total += 1
        if payload["verdict"] == "ok":
            worker.reviewed_ok += 1
        # Falling strictly below the success threshold revokes the worker and
        # discards their work in its entirety.
        if worker.reviewed_ok / worker.reviewed_total < REVIEW_SUCCESS_THRESHOLD:
            self._discard_worker_data(worker.id)

    def workers_due_review(self) -> list[str]:
        """Workers whose completed-HIT count has crossed a review batch."""
        batch = self.config.review_batch_size
        due = []
        for worker in self.workers.values():
            if worker.state != "qualified" or worker.completed_hits == 0:
                continue
            if worker.completed_hits % batch == 0 or any(
                hit.flagged_for_review and hit.worker_id == worker.id
                for hit in self.hits.values()
            ):
                due.append(worker.id)
        return sorted(due)

    # ------------------------------------------------------------------
    # answerability validation

    def add_validation(
        self, question_id: str, validator_id: str, char_start: int, char_end: int
    ) -> ValidationAssignment:
        with self._lock:
            question = self.get_question(question_id)
            if question.status != "retained":
                raise IllegalTransition(
                    f"question {question_id!r} is {question.status}, "
                    "not open for validation"
                )
            validator = self.get_worker(validator_id)
            if validator.state == "revoked":
                raise NotQualified(f"validator {validator_id!r} is revoked")
            if validator_id == question.worker_id:
                raise SelfValidation(
                    f"worker {validator_id!r} cannot validate their own question"
                )
            if any(
                v.validator_id == validator_id
                for v in self.validations.get(question_id, ())
            ):
                raise DuplicateValidation(
                    f"validator {validator_id!r} already answered "
                    f"{question_id!r}"
                )
            passage = self.passages[question.passage_id]
            try:
                span = Span.from_offsets(passage, char_start, char_end)
            except ValueError as exc:
                raise SpanOutOfBounds(str(exc)) from exc
            overlap = f1(question.gold.text, span.text)
            match = overlap >= self.config.policy.match_threshold
            self._commit(
                "validation_recorded",
                {
                    "question_id": question_id,
                    "validator_id": validator_id,
                    "answer_span": _span_payload(span),
                    "f1": overlap,
                    "match": match,
                },
            )
            return self.validations[question_id][-1]

    def _apply_validation_recorded(self, timestamp: str, payload: dict) -> None:
        assignment = ValidationAssignment(
            question_id=payload["question_id"],
            validator_id=payload["validator_id"],
            answer_span=_span_from_payload(payload["answer_span"]),
            f1=payload["f1"],
            match=payload["match"],
            timestamp=timestamp,
        )
        self.validations.setdefault(payload["question_id"], []).append(assignment)

    def get_question(self, question_id: str) -> QuestionRecord:
        try:
            return self.questions[question_id]
        except KeyError:
            raise UnknownEntity(f"unknown question {question_id!r}")

    def validation_queue(self, validator_id: str, part: str | None = None) -> list[str]:
        """Questions still needing answers from this validator."""
        parts = (part,) if part else ("dev", "test")
        queue = []
        for question in self.questions.values():
            if question.split not in parts or question.status != "retained":
                continue
            if question.worker_id == validator_id:
                continue
            existing = self.validations.get(question.id, [])
            if any(v.validator_id == validator_id for v in existing):
                continue
            if len(existing) >= REQUIRED_VALIDATIONS:
                continue
            queue.append(question.id)
        return sorted(queue)

    def run_answerability(self, part: str) -> ValidationReport:
        """Drop unanswerable dev/test questions and discard low-answerability
        workers wholesale.

        A question is answerable when at least one of its (three or more)
        validators matched the original answer at the match threshold. Worker
        attrition uses the cumulative answerable/validated ratio.
        """
        if part not in ("dev", "test"):
            raise ValueError(f"answerability runs on dev or test, got {part!r}")
        with self._lock:
            candidates = sorted(
                q.id
                for q in self.questions.values()
                if q.split == part and q.status == "retained"
            )
            lacking = [
                qid
                for qid in candidates
                if len(self.validations.get(qid, ())) < REQUIRED_VALIDATIONS
            ]
            if lacking:
                raise InsufficientValidations(
                    f"{len(lacking)} question(s) in {part!r} have fewer than "
                    f"{REQUIRED_VALIDATIONS} validations: "
                    + ", ".join(lacking[:10])
                )
            self._commit("answerability_run", {"part": part})
            return self.answerability_reports[part]

    def _apply_answerability_run(self, timestamp: str, payload: dict) -> None:
        part = payload["part"]
        candidates = sorted(
            q.id
            for q in self.questions.values()
            if q.split == part and q.status == "retained"
        )
        dropped: list[str] = []
        answerable_count = 0
        touched_workers: set[str] = set()
        for qid in candidates:
            question = self.questions[qid]
            worker = self.workers[question.worker_id]
            answerable = any(v.match for v in self.validations.get(qid, ()))
            worker.answer_validated_total += 1
            touched_workers.add(worker.id)
            if answerable:
                worker.answerable += 1
                answerable_count += 1
                self.answerability_passed.add(qid)
            else:
                question.status = "dropped_unanswerable"
                dropped.append(qid)
        discarded_workers = []
        for worker_id in sorted(touched_workers):
            worker = self.workers[worker_id]
            if worker.state == "revoked":
                continue
            ratio = worker.answerable / worker.answer_validated_total
            if ratio < ANSWERABLE_WORKER_THRESHOLD:
                self._discard_worker_data(worker_id)
                discarded_workers.append(worker_id)
        rate = answerable_count / len(candidates) if candidates else 0.0
        self.answerability_reports[part] = ValidationReport(
            part=part,
            total_questions=len(candidates),
            answerable_questions=answerable_count,
            answerability_rate=rate,
            dropped_question_ids=tuple(dropped),
            discarded_worker_ids=tuple(discarded_workers),
        )

    # ------------------------------------------------------------------
    # labels

    def tag_labels(self, question_id: str, labels: Sequence[str]) -> QuestionRecord:
        if not labels:
            raise ValueError("at least one label required")
        if len(labels) > 3:
            raise TooManyLabels(f"at most 3 labels allowed, got {len(labels)}")
        unknown = sorted(set(labels) - COMPREHENSION_LABELS)
        if unknown:
            raise UnknownLabel("unknown label(s): " + ", ".join(unknown))
        with self._lock:
            self.get_question(question_id)
            self._commit(
                "labels_tagged",
                {"question_id": question_id, "labels": sorted(set(labels))},
            )
            return self.questions[question_id]

    def _apply_labels_tagged(self, timestamp: str, payload: dict) -> None:
        question = self.questions[payload["question_id"]]
        question.labels = tuple(payload["labels"])

    # ------------------------------------------------------------------
    # exports and snapshots

    def exportable_questions(self, split: str) -> list[QuestionRecord]:
        """Retained questions from non-revoked workers, in creation order."""
        return [
            self.questions[qid]
            for qid in sorted(self.questions)
            if self.questions[qid].split == split
            and self.questions[qid].status == "retained"
            and self.workers[self.questions[qid].worker_id].state != "revoked"
        ]

    def export(
        self,
        name: str,
        out_dir: str | Path,
        splits: Sequence[str] = ("train", "dev", "test"),
    ) -> store.DatasetManifest:
        with self._lock:
            questions_by_split = {
                split: self.exportable_questions(split) for split in splits
            }
            adversary_ids = {
                q.model_answer_at_collection.adversary_id
                for questions in questions_by_split.values()
                for q in questions
            }
            adversary_id = (
                adversary_ids.pop() if len(adversary_ids) == 1 else "mixed"
            )
            return store.export_dataset(
                name,
                out_dir,
                self.passages,
                questions_by_split,
                adversary_id=adversary_id,
                validated_question_ids=self.answerability_passed,
            )

    def stats(self) -> dict:
        """Protocol counters: attempts, win rates, durations, state tallies."""
        with self._lock:
            attempts = 0
            human_wins = 0
            per_adversary: dict[str, dict[str, int]] = {}
            durations: list[float] = []
            for hit in self.hits.values():
                entry = per_adversary.setdefault(
                    hit.adversary_id, {"attempts": 0, "human_wins": 0}
                )
                for attempt in hit.attempts:
                    attempts += 1
                    entry["attempts"] += 1
                    if attempt.retained:
                        human_wins += 1
                        entry["human_wins"] += 1
                if hit.completed_at:
                    opened = datetime.fromisoformat(hit.opened_at)
                    completed = datetime.fromisoformat(hit.completed_at)
                    durations.append((completed - opened).total_seconds())
            workers_by_state: dict[str, int] = {}
            for worker in self.workers.values():
                workers_by_state[worker.state] = (
                    workers_by_state.get(worker.state, 0) + 1
                )
            questions_by_status: dict[str, int] = {}
            for question in self.questions.values():
                questions_by_status[question.status] = (
                    questions_by_status.get(question.status, 0) + 1
                )
            return {
                "attempts": attempts,
                "human_wins": human_wins,
                "human_win_rate": human_wins / attempts if attempts else 0.0,
                "per_adversary": per_adversary,
                "mean_hit_seconds": (
                    sum(durations) / len(durations) if durations else 0.0
                ),
                "workers_by_state": workers_by_state,
                "questions_by_status": questions_by_status,
                "passages": len(self.passages),
                "hits": len(self.hits),
            }

    def snapshot(self) -> dict:
        """Full state as plain JSON-serializable data, deterministic order."""
        with self._lock:
            return {
                "workers": {
                    wid: {
                        "id": w.id,
                        "state": w.state,
                        "completed_hits": w.completed_hits,
                        "reviewed_ok": w.reviewed_ok,
                        "reviewed_total": w.reviewed_total,
                        "answerable": w.answerable,
                        "answer_validated_total": w.answer_validated_total,
                        "eligibility": {
                            "country": w.eligibility.country,
                            "approval_rate": w.eligibility.approval_rate,
                            "lifetime_hits": w.eligibility.lifetime_hits,
                        },
                        "seen_passages": sorted(w.seen_passages),
                    }
                    for wid, w in sorted(self.workers.items())
                },
                "passages": {
                    pid: {
                        "id": p.id,
                        "title": p.title,
                        "text": p.text,
                        "split": self.passage_splits[pid],
                    }
                    for pid, p in sorted(self.passages.items())
                },
                "hits": {
                    hid: {
                        "id": h.id,
                        "worker_id": h.worker_id,
                        "passage_id": h.passage_id,
                        "adversary_id": h.adversary_id,
                        "split": h.split,
                        "state": h.state,
                        "pay_usd": h.pay_usd,
                        "max_questions": h.max_questions,
                        "opened_at": h.opened_at,
                        "completed_at": h.completed_at,
                        "flagged_for_review": h.flagged_for_review,
                        "retained": list(h.retained),
                        "attempts": [
                            {
                                "question_text": a.question_text,
                                "human_span": _span_payload(a.human_span),
                                "prediction": {
                                    "text": a.model_prediction.text,
                                    "char_start": a.model_prediction.char_start,
                                    "char_end": a.model_prediction.char_end,
                                    "adversary_id": a.model_prediction.adversary_id,
                                },
                                "score": {
                                    "em": a.score.em,
                                    "f1": a.score.f1,
                                    "model_win": a.score.model_win,
                                },
                                "retained": a.retained,
                                "question_id": a.question_id,
                                "timestamp": a.timestamp,
                            }
                            for a in h.attempts
                        ],
                    }
                    for hid, h in sorted(self.hits.items())
                },
                "questions": {
                    qid: {
                        "id": q.id,
                        "passage_id": q.passage_id,
                        "worker_id": q.worker_id,
                        "text": q.text,
                        "gold": _span_payload(q.gold),
                        "model_answer_at_collection": {
                            "text": q.model_answer_at_collection.text,
                            "char_start": q.model_answer_at_collection.char_start,
                            "char_end": q.model_answer_at_collection.char_end,
                            "adversary_id": (
                                q.model_answer_at_collection.adversary_id
                            ),
                        },
                        "collection_score": {
                            "em": q.collection_score.em,
                            "f1": q.collection_score.f1,
                            "model_win": q.collection_score.model_win,
                        },
                        "status": q.status,
                        "labels": list(q.labels),
                        "split": q.split,
                        "answerability_passed": qid in self.answerability_passed,
                    }
                    for qid, q in sorted(self.questions.items())
                },
                "validations": {
                    qid: [
                        {
                            "question_id": v.question_id,
                            "validator_id": v.validator_id,
                            "answer_span": _span_payload(v.answer_span),
                            "f1": v.f1,
                            "match": v.match,
                            "timestamp": v.timestamp,
                        }
                        for v in assignments
                    ]
                    for qid, assignments in sorted(self.validations.items())
                },
            }

    def write_snapshots(self, out_dir: str | Path) -> list[Path]:
        """Materialize state as one JSON file per entity kind."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        snapshot = self.snapshot()
        for kind, content in snapshot.items():
            path = out_dir / f"{kind}.json"
            path.write_bytes(store.json_bytes(content))
            written.append(path)
        return written
