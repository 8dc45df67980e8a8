"""HTTP surface binding engine, store, and analysis together.

Every response body is wrapped in a versioned envelope: ``{"v": "1",
"data": ...}`` on success, ``{"v": "1", "error": {"code", "message",
"retryable"}}`` on failure. Engine errors map one-to-one onto stable error
codes; remote-adversary outages surface as retryable 503s so the annotation
UI can ask the worker to resubmit rather than faking a verdict.

Authentication is bearer-token based when tokens are configured: worker
tokens carry the annotator identity, the admin role guards the review and
export endpoints. With no tokens configured the API runs open (development
mode) and trusts client-supplied worker ids.
"""

from __future__ import annotations

import socket
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import analysis
from .adversary import AdversaryRegistry
from .config import PlatformConfig
from .engine import (
    AttemptRecord,
    Engine,
    GenerationHit,
    ValidationAssignment,
    WorkerProfile,
    utc_now,
)
from .errors import BindFailure, PlatformError
from .events import EventLog
from .store import Passage, QuestionRecord

WIRE_VERSION = "1"

_STATUS_BY_CODE = {
    "not_eligible": 403,
    "not_qualified": 403,
    "review_of_foreign_hit": 403,
    "self_validation": 403,
    "unknown_entity": 404,
    "no_passages_left": 409,
    "hit_closed": 409,
    "duplicate_validation": 409,
    "insufficient_validations": 409,
    "unvalidated_dev_test": 409,
    "illegal_transition": 409,
    "remote_unavailable": 503,
    "malformed_response": 502,
    "span_out_of_bounds": 400,
    "incomplete_training": 400,
    "unknown_label": 400,
    "too_many_labels": 400,
    "missing_predictions": 400,
    "no_validations": 400,
    "empty_dataset": 400,
    "malformed_json": 400,
    "offset_mismatch": 400,
    "config_error": 400,
}


def ok(data, status_code: int = 200) -> JSONResponse:
    return JSONResponse({"v": WIRE_VERSION, "data": data}, status_code=status_code)


def error_response(code: str, message: str, retryable: bool) -> JSONResponse:
    return JSONResponse(
        {
            "v": WIRE_VERSION,
            "error": {"code": code, "message": message, "retryable": retryable},
        },
        status_code=_STATUS_BY_CODE.get(code, 400),
    )


# ----------------------------------------------------------------------
# wire serializers


def worker_json(worker: WorkerProfile) -> dict:
    return {
        "id": worker.id,
        "state": worker.state,
        "completed_hits": worker.completed_hits,
        "reviewed_ok": worker.reviewed_ok,
        "reviewed_total": worker.reviewed_total,
        "answerable": worker.answerable,
        "answer_validated_total": worker.answer_validated_total,
    }


def attempt_json(attempt: AttemptRecord) -> dict:
    return {
        "question_text": attempt.question_text,
        "human_span": {
            "char_start": attempt.human_span.char_start,
            "char_end": attempt.human_span.char_end,
            "text": attempt.human_span.text,
        },
        "model_answer": attempt.model_prediction.text,
        "f1": attempt.score.f1,
        "em": attempt.score.em,
        "model_win": attempt.score.model_win,
        "outcome": "not_beaten" if attempt.score.model_win else "beaten",
        "retained": attempt.retained,
        "question_id": attempt.question_id,
        "timestamp": attempt.timestamp,
    }


def hit_json(hit: GenerationHit) -> dict:
    return {
        "id": hit.id,
        "worker_id": hit.worker_id,
        "passage_id": hit.passage_id,
        "adversary_id": hit.adversary_id,
        "split": hit.split,
        "state": hit.state,
        "pay_usd": hit.pay_usd,
        "max_questions": hit.max_questions,
        "retained": list(hit.retained),
        "attempts": [attempt_json(a) for a in hit.attempts],
        "flagged_for_review": hit.flagged_for_review,
    }


def passage_json(passage: Passage, split: str) -> dict:
    return {
        "id": passage.id,
        "title": passage.title,
        "text": passage.text,
        "split": split,
    }


def question_json(question: QuestionRecord) -> dict:
    return {
        "id": question.id,
        "passage_id": question.passage_id,
        "worker_id": question.worker_id,
        "text": question.text,
        "gold": {
            "char_start": question.gold.char_start,
            "char_end": question.gold.char_end,
            "text": question.gold.text,
        },
        "status": question.status,
        "split": question.split,
        "labels": list(question.labels),
    }


def validation_json(assignment: ValidationAssignment) -> dict:
    return {
        "question_id": assignment.question_id,
        "validator_id": assignment.validator_id,
        "answer_span": {
            "char_start": assignment.answer_span.char_start,
            "char_end": assignment.answer_span.char_end,
            "text": assignment.answer_span.text,
        },
        "f1": assignment.f1,
        "match": assignment.match,
    }


# ----------------------------------------------------------------------
# request bodies


class OpenHitBody(BaseModel):
    adversary_id: str
    split: str = "train"
    worker_id: str | None = None


class SubmitQuestionBody(BaseModel):
    question_text: str
    char_start: int = Field(ge=0)
    char_end: int = Field(ge=0)


class TrainingBody(BaseModel):
    artifacts: list[dict]


class ValidationBody(BaseModel):
    char_start: int = Field(ge=0)
    char_end: int = Field(ge=0)
    validator_id: str | None = None


class RegisterWorkerBody(BaseModel):
    worker_id: str
    country: str
    approval_rate: float
    lifetime_hits: int


class QualifyBody(BaseModel):
    approved: bool


class ReviewBody(BaseModel):
    hit_id: str
    verdict: str


class RevokeBody(BaseModel):
    reason: str = ""


class AnswerabilityBody(BaseModel):
    part: str


class LabelsBody(BaseModel):
    labels: list[str]


class ExportBody(BaseModel):
    name: str
    out_dir: str
    splits: list[str] = ["train", "dev", "test"]


class PassageBody(BaseModel):
    id: str
    title: str
    text: str
    split: str = "train"


# ----------------------------------------------------------------------
# auth


class Identity:
    def __init__(self, role: str, worker_id: str | None):
        self.role = role
        self.worker_id = worker_id


class AuthError(PlatformError):
    code = "unauthorized"


_STATUS_BY_CODE["unauthorized"] = 401
_STATUS_BY_CODE["forbidden"] = 403


class ForbiddenError(PlatformError):
    code = "forbidden"


def build_auth(config: PlatformConfig):
    tokens = {entry.token: entry for entry in config.tokens}
    enabled = bool(tokens)

    def identity(authorization: str | None = Header(default=None)) -> Identity:
        if not enabled:
            return Identity(role="open", worker_id=None)
        if not authorization or not authorization.startswith("Bearer "):
            raise AuthError("missing bearer token")
        entry = tokens.get(authorization.removeprefix("Bearer "))
        if entry is None:
            raise AuthError("unknown token")
        return Identity(role=entry.role, worker_id=entry.worker_id)

    return identity, enabled


def resolve_worker(identity: Identity, claimed: str | None) -> str:
    """Pick the acting worker id: token identity wins over the request body."""
    if identity.role == "open":
        if not claimed:
            raise ForbiddenError("worker_id required when auth is disabled")
        return claimed
    if identity.role == "admin":
        if not claimed:
            raise ForbiddenError("admin must name a worker_id explicitly")
        return claimed
    if identity.role != "worker" or not identity.worker_id:
        raise ForbiddenError("worker token required")
    if claimed and claimed != identity.worker_id:
        raise ForbiddenError("worker_id does not match token identity")
    return identity.worker_id


def require_admin(identity: Identity) -> None:
    if identity.role not in ("open", "admin"):
        raise ForbiddenError("admin token required")


# ----------------------------------------------------------------------
# app factory


def create_app(config: PlatformConfig, engine: Engine | None = None) -> FastAPI:
    config.validate()
    if engine is None:
        config.data_dir.mkdir(parents=True, exist_ok=True)
        log = EventLog(config.data_dir / "events.ndjson", utc_now)
        registry = AdversaryRegistry(config.adversaries)
        engine = Engine(config.engine_config(), registry=registry, log=log)

    identity_dep, _ = build_auth(config)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        engine.close()

    app = FastAPI(title="qaloop", lifespan=lifespan)
    app.state.engine = engine
    app.state.config = config

    @app.exception_handler(PlatformError)
    async def handle_platform_error(request: Request, exc: PlatformError):
        return error_response(exc.code, exc.message, exc.retryable)

    @app.exception_handler(ValueError)
    async def handle_value_error(request: Request, exc: ValueError):
        return error_response("invalid_request", str(exc), False)

    # -- open endpoints ------------------------------------------------

    @app.get("/api/health")
    def health():
        return ok({"status": "ok", "adversaries": engine.registry.ids()})

    # -- worker endpoints ----------------------------------------------

    @app.get("/api/passages/{passage_id}")
    def get_passage(passage_id: str, identity: Identity = Depends(identity_dep)):
        passage = engine.get_passage(passage_id)
        return ok(passage_json(passage, engine.passage_splits[passage_id]))

    @app.get("/api/workers/{worker_id}")
    def get_worker(worker_id: str, identity: Identity = Depends(identity_dep)):
        return ok(worker_json(engine.get_worker(worker_id)))

    @app.post("/api/workers/{worker_id}/training")
    def submit_training(
        worker_id: str,
        body: TrainingBody,
        identity: Identity = Depends(identity_dep),
    ):
        acting = resolve_worker(identity, worker_id)
        worker = engine.qualification_flow(acting, body.artifacts)
        return ok(worker_json(worker))

    @app.post("/api/hits/generation")
    def open_hit(body: OpenHitBody, identity: Identity = Depends(identity_dep)):
        worker_id = resolve_worker(identity, body.worker_id)
        hit = engine.open_generation_hit(worker_id, body.adversary_id, body.split)
        return ok(hit_json(hit), status_code=201)

    @app.get("/api/hits/{hit_id}")
    def get_hit(hit_id: str, identity: Identity = Depends(identity_dep)):
        return ok(hit_json(engine.get_hit(hit_id)))

    @app.post("/api/hits/{hit_id}/questions")
    def submit_question(
        hit_id: str,
        body: SubmitQuestionBody,
        identity: Identity = Depends(identity_dep),
    ):
        if identity.role == "worker":
            hit = engine.get_hit(hit_id)
            if hit.worker_id != identity.worker_id:
                raise ForbiddenError("hit belongs to another worker")
        attempt = engine.submit_question(
            hit_id, body.question_text, body.char_start, body.char_end
        )
        hit = engine.get_hit(hit_id)
        payload = attempt_json(attempt)
        payload["attempt_count"] = len(hit.attempts)
        payload["retained_count"] = len(hit.retained)
        payload["remaining"] = hit.max_questions - len(hit.retained)
        return ok(payload, status_code=201)

    @app.post("/api/hits/{hit_id}/complete")
    def complete_hit(hit_id: str, identity: Identity = Depends(identity_dep)):
        if identity.role == "worker":
            hit = engine.get_hit(hit_id)
            if hit.worker_id != identity.worker_id:
                raise ForbiddenError("hit belongs to another worker")
        return ok(hit_json(engine.complete_hit(hit_id)))

    @app.get("/api/validation/queue")
    def validation_queue(
        validator_id: str | None = None,
        part: str | None = None,
        identity: Identity = Depends(identity_dep),
    ):
        acting = resolve_worker(identity, validator_id)
        queue = engine.validation_queue(acting, part)
        items = []
        for qid in queue:
            question = engine.get_question(qid)
            items.append(
                {
                    "question_id": qid,
                    "question_text": question.text,
                    "passage_id": question.passage_id,
                }
            )
        return ok({"queue": items})

    @app.post("/api/validation/{question_id}/answers")
    def submit_validation(
        question_id: str,
        body: ValidationBody,
        identity: Identity = Depends(identity_dep),
    ):
        acting = resolve_worker(identity, body.validator_id)
        assignment = engine.add_validation(
            question_id, acting, body.char_start, body.char_end
        )
        return ok(validation_json(assignment), status_code=201)

    @app.get("/api/stats")
    def stats(identity: Identity = Depends(identity_dep)):
        return ok(engine.stats())

    # -- admin endpoints -----------------------------------------------

    @app.post("/api/admin/workers")
    def register_worker(
        body: RegisterWorkerBody, identity: Identity = Depends(identity_dep)
    ):
        require_admin(identity)
        worker = engine.register_worker(
            body.worker_id, body.country, body.approval_rate, body.lifetime_hits
        )
        return ok(worker_json(worker), status_code=201)

    @app.get("/api/admin/workers")
    def list_workers(identity: Identity = Depends(identity_dep)):
        require_admin(identity)
        return ok(
            {
                "workers": [
                    worker_json(w)
                    for _, w in sorted(engine.workers.items())
                ]
            }
        )

    @app.post("/api/admin/workers/{worker_id}/qualify")
    def qualify_worker(
        worker_id: str,
        body: QualifyBody,
        identity: Identity = Depends(identity_dep),
    ):
        require_admin(identity)
        worker = engine.review_qualification(worker_id, body.approved)
        return ok(worker_json(worker))

    @app.get("/api/admin/workers/{worker_id}/review-sample")
    def review_sample(
        worker_id: str, identity: Identity = Depends(identity_dep)
    ):
        require_admin(identity)
        return ok({"hit_ids": engine.review_sample(worker_id)})

    @app.post("/api/admin/workers/{worker_id}/review")
    def record_review(
        worker_id: str,
        body: ReviewBody,
        identity: Identity = Depends(identity_dep),
    ):
        require_admin(identity)
        worker = engine.record_review(worker_id, body.hit_id, body.verdict)
        return ok(worker_json(worker))

    @app.post("/api/admin/workers/{worker_id}/revoke")
    def revoke_worker(
        worker_id: str,
        body: RevokeBody,
        identity: Identity = Depends(identity_dep),
    ):
        require_admin(identity)
        return ok(worker_json(engine.revoke_worker(worker_id, body.reason)))

    @app.get("/api/admin/review-due")
    def review_due(identity: Identity = Depends(identity_dep)):
        require_admin(identity)
        return ok({"worker_ids": engine.workers_due_review()})

    @app.post("/api/admin/passages")
    def add_passage(
        body: PassageBody, identity: Identity = Depends(identity_dep)
    ):
        require_admin(identity)
        passage = engine.add_passage(
            Passage(id=body.id, title=body.title, text=body.text), body.split
        )
        return ok(passage_json(passage, body.split), status_code=201)

    @app.post("/api/admin/answerability")
    def run_answerability(
        body: AnswerabilityBody, identity: Identity = Depends(identity_dep)
    ):
        require_admin(identity)
        report = engine.run_answerability(body.part)
        return ok(
            {
                "part": report.part,
                "total_questions": report.total_questions,
                "answerable_questions": report.answerable_questions,
                "answerability_rate": report.answerability_rate,
                "dropped_question_ids": list(report.dropped_question_ids),
                "discarded_worker_ids": list(report.discarded_worker_ids),
            }
        )

    @app.post("/api/admin/questions/{question_id}/labels")
    def tag_labels(
        question_id: str,
        body: LabelsBody,
        identity: Identity = Depends(identity_dep),
    ):
        require_admin(identity)
        question = engine.tag_labels(question_id, body.labels)
        return ok(question_json(question))

    @app.get("/api/admin/questions/{question_id}")
    def get_question(
        question_id: str, identity: Identity = Depends(identity_dep)
    ):
        require_admin(identity)
        question = engine.get_question(question_id)
        payload = question_json(question)
        payload["validations"] = [
            validation_json(v)
            for v in engine.validations.get(question_id, [])
        ]
        return ok(payload)

    @app.post("/api/admin/export")
    def export_dataset(
        body: ExportBody, identity: Identity = Depends(identity_dep)
    ):
        require_admin(identity)
        manifest = engine.export(body.name, body.out_dir, body.splits)
        return ok(
            {
                "name": manifest.name,
                "adversary_id": manifest.adversary_id,
                "counts": manifest.counts,
                "checksums": manifest.checksums,
            }
        )

    @app.get("/api/admin/human-performance")
    def human_performance(
        part: str = "dev",
        seed: int = 0,
        identity: Identity = Depends(identity_dep),
    ):
        require_admin(identity)
        questions = engine.exportable_questions(part)
        validations = {
            qid: [v.answer_span.text for v in assignments]
            for qid, assignments in engine.validations.items()
        }
        result = analysis.human_performance(questions, validations, seed)
        return ok({"em": result.em, "f1": result.f1, "count": len(questions)})

    # -- static UI -----------------------------------------------------

    if config.static_dir and Path(config.static_dir).is_dir():
        app.mount(
            "/ui",
            StaticFiles(directory=str(config.static_dir), html=True),
            name="ui",
        )

        @app.get("/", include_in_schema=False)
        def index():
            return RedirectResponse("/ui/")

    return app


def check_bindable(host: str, port: int) -> None:
    """Fail fast with a clear error when the port is taken."""
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((host, port))
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    finally:
        probe.close()


def serve(config: PlatformConfig) -> None:
    """Run the platform until interrupted. Raises BindFailure up front and
    CorruptEventLog (from engine recovery) before binding."""
    import uvicorn

    config.validate()
    check_bindable(config.listen_host, config.listen_port)
    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port)
