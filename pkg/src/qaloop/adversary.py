"""The pluggable model in the loop.

Three kinds are built in:

* ``stub``: returns scripted answers, for tests and UI development. Stubs may
  return free text that is not a passage span; such predictions carry no
  character offsets.
* ``lexical_window``: a deterministic word-overlap baseline that scores every
  candidate span against the question and returns the argmax. Dependency-free
  and fast enough to sit in the annotation loop during development.
* ``remote``: an HTTP client for an out-of-process QA model speaking the
  JSON protocol below (POST ``{endpoint}/predict`` with
  ``{"passage": ..., "question": ...}``, answering
  ``{"answer": ..., "char_start": ..., "char_end": ...}``).
"""

from __future__ import annotations

import re
import threading
import time
from collections import Counter
from dataclasses import dataclass, field

import httpx

from .errors import MalformedResponse, RemoteUnavailable, UnknownEntity
from .metrics import normalize
from .store import Passage

DEFAULT_MAX_SPAN_TOKENS = 10
DEFAULT_CONTEXT_TOKENS = 3
DEFAULT_TIMEOUT_S = 10.0
DEFAULT_RETRIES = 2
DEFAULT_MAX_IN_FLIGHT = 8

_WORD_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Prediction:
    """A model answer. Offsets are present whenever the answer is a passage
    span; a stub may return free text, flagged by absent offsets."""

    text: str
    char_start: int | None
    char_end: int | None
    latency_ms: float
    adversary_id: str


@dataclass(frozen=True)
class AdversaryDescriptor:
    id: str
    kind: str  # stub | lexical_window | remote
    endpoint: str | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("stub", "lexical_window", "remote"):
            raise ValueError(f"unknown adversary kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote adversary requires an endpoint")


class Adversary:
    """Interface: map (passage, question) to a predicted answer."""

    def __init__(self, descriptor: AdversaryDescriptor):
        self.descriptor = descriptor

    @property
    def id(self) -> str:
        return self.descriptor.id

    def predict(self, passage: Passage, question: str) -> Prediction:
        if not passage.text:
            raise ValueError("passage text must be non-empty")
        if not question:
            raise ValueError("question must be non-empty")
        start = time.perf_counter()
        text, char_start, char_end = self._answer(passage, question)
        latency_ms = (time.perf_counter() - start) * 1000.0
        return Prediction(
            text=text,
            char_start=char_start,
            char_end=char_end,
            latency_ms=latency_ms,
            adversary_id=self.id,
        )

    def _answer(self, passage: Passage, question: str):
        raise NotImplementedError


class StubAdversary(Adversary):
    """Echoes configured answers.

    Config keys: ``answers`` maps question text to answer, ``script`` is a
    list consumed one entry per call (for scripted reject/accept sequences),
    ``default`` is the fallback answer. Offsets are attached when the answer
    happens to occur in the passage.
    """

    def __init__(self, descriptor: AdversaryDescriptor):
        super().__init__(descriptor)
        self._answers = dict(descriptor.config.get("answers", {}))
        self._script = list(descriptor.config.get("script", []))
        self._default = descriptor.config.get("default", "")
        self._lock = threading.Lock()

    def _answer(self, passage: Passage, question: str):
        with self._lock:
            if self._script:
                text = self._script.pop(0)
            else:
                text = self._answers.get(question, self._default)
        position = passage.text.find(text) if text else -1
        if position >= 0:
            return text, position, position + len(text)
        return text, None, None


def _aligned_tokens(text: str) -> list[tuple[str, int, int]]:
    """Normalized tokens with their character offsets in the raw text.

    Per-token normalization matches metrics.normalize applied to the whole
    string: tokens that normalize to nothing (pure punctuation, articles)
    are dropped.
    """
    aligned = []
    for match in _WORD_RE.finditer(text):
        parts = normalize(match.group())
        if parts:
            aligned.append(("".join(parts), match.start(), match.end()))
    return aligned


def score_window(
    passage_tokens: list[str],
    span_start: int,
    span_length: int,
    question_tokens: list[str],
    context: int = DEFAULT_CONTEXT_TOKENS,
) -> float:
    """Overlap score of a candidate span, length-penalized.

    Counts the bag overlap between the question tokens and the span plus
    ``context`` tokens on either side, divided by (1 + span length). Higher
    is better; ties are broken by the caller (earliest start, then shortest).
    """
    if span_length < 1 or span_start < 0:
        raise ValueError("span must have positive length and start in bounds")
    if span_start + span_length > len(passage_tokens):
        raise ValueError("span exceeds passage")
    lo = max(0, span_start - context)
    hi = min(len(passage_tokens), span_start + span_length + context)
    window = Counter(passage_tokens[lo:hi])
    overlap = sum((window & Counter(question_tokens)).values())
    return overlap / (1 + span_length)


class LexicalWindowAdversary(Adversary):
    """Exhaustively scores every span up to ``max_span_tokens`` and returns
    the best one. Fully deterministic."""

    def __init__(self, descriptor: AdversaryDescriptor):
        super().__init__(descriptor)
        self.max_span_tokens = int(
            descriptor.config.get("max_span_tokens", DEFAULT_MAX_SPAN_TOKENS)
        )
        self.context_tokens = int(
            descriptor.config.get("context_tokens", DEFAULT_CONTEXT_TOKENS)
        )

    def _answer(self, passage: Passage, question: str):
        aligned = _aligned_tokens(passage.text)
        if not aligned:
            return passage.text.strip() or passage.text, 0, len(passage.text)
        tokens = [t for t, _, _ in aligned]
        question_tokens = normalize(question)

        best = None  # (score, start, length)
        for start in range(len(tokens)):
            window_max = min(self.max_span_tokens, len(tokens) - start)
            for length in range(1, window_max + 1):
                score = score_window(
                    tokens, start, length, question_tokens, self.context_tokens
                )
                # Strict comparison keeps the earliest start, then the
                # shortest span, among equal scores.
                if best is None or score > best[0]:
                    best = (score, start, length)
        _, start, length = best
        char_start = aligned[start][1]
        char_end = aligned[start + length - 1][2]
        return passage.text[char_start:char_end], char_start, char_end


class RemoteAdversary(Adversary):
    """HTTP client for an out-of-process model.

    Unreachable endpoints and timeouts surface as RemoteUnavailable, which is
    retryable; the annotation flow must never treat them as a human win.
    Concurrent calls are capped by a semaphore.
    """

    def __init__(self, descriptor: AdversaryDescriptor):
        super().__init__(descriptor)
        config = descriptor.config
        self.timeout_s = float(config.get("timeout_s", DEFAULT_TIMEOUT_S))
        self.retries = int(config.get("retries", DEFAULT_RETRIES))
        max_in_flight = int(config.get("max_in_flight", DEFAULT_MAX_IN_FLIGHT))
        self._semaphore = threading.Semaphore(max_in_flight)
        self._client = httpx.Client(timeout=self.timeout_s)
        endpoint = descriptor.endpoint.rstrip("/")
        self._url = (
            endpoint if endpoint.endswith("/predict") else endpoint + "/predict"
        )

    def close(self) -> None:
        self._client.close()

    def _answer(self, passage: Passage, question: str):
        body = {"passage": passage.text, "question": question}
        last_error: Exception | None = None
        for _ in range(1 + self.retries):
            with self._semaphore:
                try:
                    response = self._client.post(self._url, json=body)
                except httpx.HTTPError as exc:
                    last_error = exc
                    continue
            if response.status_code >= 500:
                last_error = RuntimeError(f"server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise MalformedResponse(
                    f"adversary {self.id!r} answered HTTP {response.status_code}"
                )
            return self._parse(passage, response)
        raise RemoteUnavailable(
            f"adversary {self.id!r} unreachable at {self._url}: {last_error}"
        )

    def _parse(self, passage: Passage, response: httpx.Response):
        try:
            payload = response.json()
        except ValueError as exc:
            raise MalformedResponse(
                f"adversary {self.id!r} returned invalid JSON: {exc}"
            ) from exc
        try:
            text = payload["answer"]
            char_start = int(payload["char_start"])
            char_end = int(payload["char_end"])
        except (TypeError, KeyError, ValueError) as exc:
            raise MalformedResponse(
                f"adversary {self.id!r} response missing fields: {exc}"
            ) from exc
        if not (0 <= char_start <= char_end <= len(passage.text)):
            raise MalformedResponse(
                f"adversary {self.id!r} offsets [{char_start}, {char_end}) "
                "out of passage bounds"
            )
        if passage.text[char_start:char_end] != text:
            raise MalformedResponse(
                f"adversary {self.id!r} answer text does not match its offsets"
            )
        return text, char_start, char_end


_KINDS = {
    "stub": StubAdversary,
    "lexical_window": LexicalWindowAdversary,
    "remote": RemoteAdversary,
}


def build_adversary(descriptor: AdversaryDescriptor) -> Adversary:
    return _KINDS[descriptor.kind](descriptor)


class AdversaryRegistry:
    """Adversaries known to the platform, keyed by id."""

    def __init__(self, descriptors: list[AdversaryDescriptor] = ()):  # type: ignore[assignment]
        self._adversaries: dict[str, Adversary] = {}
        for descriptor in descriptors:
            self.register(build_adversary(descriptor))

    def register(self, adversary: Adversary) -> None:
        self._adversaries[adversary.id] = adversary

    def get(self, adversary_id: str) -> Adversary:
        try:
            return self._adversaries[adversary_id]
        except KeyError:
            raise UnknownEntity(f"no adversary registered as {adversary_id!r}")

    def ids(self) -> list[str]:
        return sorted(self._adversaries)

    def __contains__(self, adversary_id: str) -> bool:
        return adversary_id in self._adversaries
