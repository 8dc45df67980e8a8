"""Dataset persistence: SQuAD-format I/O, majority-vote consolidation,
title-stratified splitting, and export of collected datasets.

All character offsets are code-point offsets into the passage text. Exported
files are SQuAD-v1.1-shaped JSON; paragraphs additionally carry a ``pid``
field so internally generated passage ids survive an export/import round
trip (readers that only know the official shape can ignore it).
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import MalformedJson, OffsetMismatch, UnvalidatedDevTest
from .metrics import MatchScore, normalize

SPLITS = ("train", "dev", "test")

@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("passage text must be non-empty")


@dataclass(frozen=True)
class Span:
    """A character-offset answer region within a passage."""

    char_start: int
    char_end: int
    text: str

    @classmethod
    def from_offsets(cls, passage: Passage, char_start: int, char_end: int) -> Span:
        if not (0 <= char_start < char_end <= len(passage.text)):
            raise ValueError(
                f"span [{char_start}, {char_end}) out of bounds for passage "
                f"{passage.id!r} of length {len(passage.text)}"
            )
        return cls(char_start, char_end, passage.text[char_start:char_end])

    def check_against(self, passage: Passage) -> None:
        if passage.text[self.char_start : self.char_end] != self.text:
            raise ValueError(
                f"span text does not match passage {passage.id!r} at "
                f"[{self.char_start}, {self.char_end})"
            )


@dataclass
class QuestionRecord:
    """One collected question with its human answer and collection outcome."""

    id: str
    passage_id: str
    worker_id: str
    text: str
    gold: Span
    model_answer_at_collection: "PredictionView"
    collection_score: MatchScore
    split: str
    status: str = "retained"  # retained | discarded | dropped_unanswerable
    labels: tuple[str, ...] = ()


@dataclass(frozen=True)
class PredictionView:
    """The model answer as stored on a question record."""

    text: str
    char_start: int | None
    char_end: int | None
    adversary_id: str


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    adversary_id: str
    counts: dict  # split -> {"passages": int, "qas": int}
    checksums: dict  # filename -> sha256 hex digest


@dataclass(frozen=True)
class ImportedQuestion:
    """A question as read from a SQuAD-shaped file (possibly multi-answer)."""

    id: str
    passage_id: str
    text: str
    answers: tuple[Span, ...]


@dataclass(frozen=True)
class ImportedDataset:
    passages: tuple[Passage, ...]
    questions: tuple[ImportedQuestion, ...]

    @property
    def passages_by_id(self) -> dict[str, Passage]:
        return {p.id: p for p in self.passages}


def import_squad(source: str | Path | Mapping) -> ImportedDataset:
    """Read a SQuAD v1.1 JSON file (or already-parsed payload).

    Every answer is resolved against its context; an ``answer_start`` that
    does not locate the answer text raises OffsetMismatch naming the qa id.
    """
    if isinstance(source, (str, Path)):
        try:
            payload = json.loads(Path(source).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedJson(f"{source}: {exc}") from exc
    else:
        payload = source

    if not isinstance(payload, Mapping) or "data" not in payload:
        raise MalformedJson("missing top-level 'data' field")

    passages: list[Passage] = []
    questions: list[ImportedQuestion] = []
    for article in payload["data"]:
        try:
            title = article["title"]
            paragraphs = article["paragraphs"]
        except (TypeError, KeyError) as exc:
            raise MalformedJson(f"article missing field: {exc}") from exc
        for index, paragraph in enumerate(paragraphs):
            try:
                context = paragraph["context"]
                qas = paragraph["qas"]
            except (TypeError, KeyError) as exc:
                raise MalformedJson(f"paragraph missing field: {exc}") from exc
            pid = paragraph.get("pid", f"{title}::{index}")
            passage = Passage(id=pid, title=title, text=context)
            passages.append(passage)
            for qa in qas:
                try:
                    qa_id = qa["id"]
                    question_text = qa["question"]
                    raw_answers = qa["answers"]
                except (TypeError, KeyError) as exc:
                    raise MalformedJson(f"qa missing field: {exc}") from exc
                spans = []
                for answer in raw_answers:
                    start = answer["answer_start"]
                    text = answer["text"]
                    end = start + len(text)
                    if context[start:end] != text:
                        raise OffsetMismatch(
                            f"answer_start {start} does not locate "
                            f"{text!r} in context for qa {qa_id!r}",
                            qa_id=qa_id,
                        )
                    spans.append(Span(start, end, text))
                questions.append(
                    ImportedQuestion(
                        id=qa_id,
                        passage_id=pid,
                        text=question_text,
                        answers=tuple(spans),
                    )
                )
    return ImportedDataset(passages=tuple(passages), questions=tuple(questions))


def consolidate_majority(answers: Sequence[Span]) -> Span:
    """Pick the majority answer; ties go to the earliest annotation.

    Answers vote by normalized text, so surface variants of the same answer
    pool their counts. The returned span is always one of the inputs.
    """
    if not answers:
        raise ValueError("consolidate_majority needs at least one answer")
    counts = Counter(" ".join(normalize(a.text)) for a in answers)
    best_count = max(counts.values())
    for answer in answers:
        if counts[" ".join(normalize(answer.text))] == best_count:
            return answer
    raise AssertionError("unreachable: some answer must carry the best count")


def _title_order_key(seed: int, title: str) -> str:
    return hashlib.sha256(f"{seed}:{title}".encode("utf-8")).hexdigest()


def split_stratified(
    passages: Sequence[Passage],
    ratio: float,
    seed: int,
    weights: Mapping[str, int] | None = None,
) -> tuple[list[Passage], list[Passage]]:
    """Partition passages into two parts with whole titles kept together.

    Titles are visited in an order fixed by a seeded hash and greedily
    assigned to whichever part is furthest below its target share. ``weights``
    maps passage id to a count (e.g. its number of questions); without it
    every passage weighs 1. Deterministic for a given seed.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")

    by_title: dict[str, list[Passage]] = {}
    for passage in passages:
        by_title.setdefault(passage.title, []).append(passage)

    def title_weight(title: str) -> int:
        if weights is None:
            return len(by_title[title])
        return sum(weights.get(p.id, 0) for p in by_title[title])

    total = sum(title_weight(t) for t in by_title)
    part_a: list[Passage] = []
    part_b: list[Passage] = []
    weight_a = weight_b = 0
    for title in sorted(by_title, key=lambda t: _title_order_key(seed, t)):
        # Assign to the part with the larger remaining capacity.
        deficit_a = ratio * total - weight_a
        deficit_b = (1.0 - ratio) * total - weight_b
        if deficit_a >= deficit_b:
            part_a.extend(by_title[title])
            weight_a += title_weight(title)
        else:
            part_b.extend(by_title[title])
            weight_b += title_weight(title)
    return part_a, part_b


def json_bytes(payload) -> bytes:
    text = json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1)
    return (text + "\n").encode("utf-8")


def squad_payload(
    passages_by_id: Mapping[str, Passage],
    questions: Sequence[QuestionRecord],
) -> dict:
    """Arrange question records into the SQuAD v1.1 JSON shape."""
    grouped: dict[str, list[QuestionRecord]] = {}
    for question in questions:
        grouped.setdefault(question.passage_id, []).append(question)

    by_title: dict[str, list[str]] = {}
    for pid in grouped:
        by_title.setdefault(passages_by_id[pid].title, []).append(pid)

    data = []
    for title in sorted(by_title):
        paragraphs = []
        for pid in sorted(by_title[title]):
            passage = passages_by_id[pid]
            qas = [
                {
                    "id": q.id,
                    "question": q.text,
                    "answers": [
                        {"text": q.gold.text, "answer_start": q.gold.char_start}
                    ],
                }
                for q in sorted(grouped[pid], key=lambda q: q.id)
            ]
            paragraphs.append({"context": passage.text, "pid": pid, "qas": qas})
        data.append({"title": title, "paragraphs": paragraphs})
    return {"version": "1.1", "data": data}


def export_dataset(
    name: str,
    out_dir: str | Path,
    passages_by_id: Mapping[str, Passage],
    questions_by_split: Mapping[str, Sequence[QuestionRecord]],
    adversary_id: str,
    validated_question_ids: Iterable[str] = (),
) -> DatasetManifest:
    """Write one SQuAD-shaped file per split plus a manifest.

    Only retained questions may be exported, and every dev/test question must
    have passed answerability validation (its id listed in
    ``validated_question_ids``), otherwise UnvalidatedDevTest is raised.
    Output bytes are deterministic, so re-exporting the same records yields
    identical checksums.
    """
    validated = set(validated_question_ids)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    counts: dict[str, dict[str, int]] = {}
    checksums: dict[str, str] = {}
    for split, questions in sorted(questions_by_split.items()):
        for question in questions:
            if question.status != "retained":
                raise ValueError(
                    f"refusing to export {question.id!r} with status "
                    f"{question.status!r}"
                )
            if split in ("dev", "test") and question.id not in validated:
                raise UnvalidatedDevTest(
                    f"question {question.id!r} in split {split!r} lacks an "
                    "answerability pass"
                )
        payload = squad_payload(passages_by_id, questions)
        blob = json_bytes(payload)
        filename = f"{name}-{split}.json"
        (out_dir / filename).write_bytes(blob)
        checksums[filename] = hashlib.sha256(blob).hexdigest()
        counts[split] = {
            "passages": len({q.passage_id for q in questions}),
            "qas": len(questions),
        }

    manifest = DatasetManifest(
        name=name, adversary_id=adversary_id, counts=counts, checksums=checksums
    )
    manifest_blob = json_bytes(
        {
            "name": manifest.name,
            "adversary_id": manifest.adversary_id,
            "counts": manifest.counts,
            "checksums": manifest.checksums,
        }
    )
    (out_dir / f"{name}-manifest.json").write_bytes(manifest_blob)
    return manifest
