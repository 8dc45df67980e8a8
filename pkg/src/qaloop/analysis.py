"""Evaluation and dataset-statistics suite.

EM/F1 evaluation of prediction files, non-expert human performance from
validator answers, passage/question overlap statistics, question and answer
typing, and comprehension-label bookkeeping. All computations are pure
functions over immutable snapshots.
"""

from __future__ import annotations

import random
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import EmptyDataset, MissingPredictions, NoValidations
from .metrics import em, f1, normalize
from .store import Passage, QuestionRecord

# The closed comprehension-requirement taxonomy available for tagging
# questions (up to three per question, not mutually exclusive).
COMPREHENSION_LABELS = frozenset(
    {
        "explicit",
        "paraphrasing",
        "external-knowledge",
        "co-reference",
        "multi-hop",
        "comparative",
        "numeric",
        "negation",
        "filtering",
        "temporal",
        "spatial",
        "inductive",
        "implicit",
    }
)

WH_WORDS = (
    "what",
    "which",
    "who",
    "whose",
    "whom",
    "where",
    "when",
    "why",
    "how",
    "in",
)

ANSWER_TYPES = (
    "date",
    "numeric",
    "proper_noun",
    "common_noun",
    "verb_phrase",
    "other",
)

_MONTHS = {
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
}

_NUMBER_WORDS = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen", "twenty", "thirty",
    "forty", "fifty", "sixty", "seventy", "eighty", "ninety", "hundred",
    "thousand", "million", "billion",
}

_YEAR_RE = re.compile(r"\b\d{3,4}\b")
_DATE_SHAPE_RE = re.compile(r"\b\d{1,2}[/.-]\d{1,2}[/.-]\d{2,4}\b")


@dataclass(frozen=True)
class QuestionScore:
    id: str
    em: float
    f1: float


@dataclass(frozen=True)
class EvalResult:
    """Aggregate EM/F1 percentages plus the per-question breakdown."""

    em: float
    f1: float
    per_question: tuple[QuestionScore, ...]


@dataclass(frozen=True)
class StatsReport:
    mean_question_words: float
    mean_answer_words: float
    mean_longest_ngram_overlap: float
    ngram_overlap_histogram: dict[int, int]
    question_length_histogram: dict[int, int]
    answer_length_histogram: dict[int, int]
    wh_distribution: dict[str, float]
    answer_type_distribution: dict[str, float]
    question_prefix_tree: dict


def _aggregate(per_question: Sequence[QuestionScore]) -> EvalResult:
    total = len(per_question)
    return EvalResult(
        em=100.0 * sum(s.em for s in per_question) / total,
        f1=100.0 * sum(s.f1 for s in per_question) / total,
        per_question=tuple(per_question),
    )


def evaluate(
    dataset: Sequence[QuestionRecord] | Mapping[str, str],
    predictions: Mapping[str, str],
) -> EvalResult:
    """Score predictions against each question's single gold answer.

    ``dataset`` is either a sequence of question records or a plain mapping
    of question id to gold answer string. Aggregates are arithmetic means of
    per-question scores, times 100.
    """
    if isinstance(dataset, Mapping):
        golds = sorted(dataset.items())
    else:
        golds = [(q.id, q.gold.text) for q in dataset]
    if not golds:
        raise EmptyDataset("no questions to evaluate")
    missing = sorted(qid for qid, _ in golds if qid not in predictions)
    if missing:
        raise MissingPredictions(
            f"{len(missing)} question(s) lack predictions: "
            + ", ".join(missing[:10]),
            missing=missing,
        )
    scores = []
    for qid, gold in golds:
        predicted = predictions[qid]
        scores.append(
            QuestionScore(
                id=qid,
                em=float(em(gold, predicted)),
                f1=f1(gold, predicted),
            )
        )
    return _aggregate(scores)


def human_performance(
    questions: Sequence[QuestionRecord],
    validations: Mapping[str, Sequence[str]],
    seed: int,
) -> EvalResult:
    """Non-expert human EM/F1: one randomly chosen validator answer per
    question, scored against the original. Deterministic per seed."""
    if not questions:
        raise EmptyDataset("no questions to score")
    rng = random.Random(seed)
    scores = []
    for question in sorted(questions, key=lambda q: q.id):
        answers = validations.get(question.id)
        if not answers:
            raise NoValidations(f"question {question.id!r} has no validations")
        chosen = rng.choice(list(answers))
        gold = question.gold.text
        scores.append(
            QuestionScore(
                id=question.id,
                em=float(em(gold, chosen)),
                f1=f1(gold, chosen),
            )
        )
    return _aggregate(scores)


def longest_ngram_overlap(passage_text: str, question_text: str) -> int:
    """Largest n such that some contiguous n-token piece of the normalized
    question occurs contiguously in the normalized passage."""
    passage = normalize(passage_text)
    question = normalize(question_text)
    best = 0
    limit = min(len(passage), len(question))
    for n in range(1, limit + 1):
        grams = {
            tuple(passage[i : i + n]) for i in range(len(passage) - n + 1)
        }
        if any(
            tuple(question[i : i + n]) in grams
            for i in range(len(question) - n + 1)
        ):
            best = n
        else:
            break
    return best


def wh_word(question_text: str) -> str:
    """Question type: the first token that is a known wh-word, else other."""
    for token in normalize(question_text):
        if token in WH_WORDS:
            return token
    return "other"


def answer_type(answer_text: str) -> str:
    """Heuristic answer typing.

    Checked in order: date shapes (month names, years, d/m/y patterns), then
    numeric content, then capitalized proper-noun-like phrases, then a crude
    verb-phrase check, then common noun phrase. This is a rule-of-thumb
    approximation, not a linguistic analysis; everything unclassifiable lands
    in other.
    """
    raw_tokens = answer_text.split()
    tokens = normalize(answer_text)
    if not tokens:
        return "other"
    if (
        any(t in _MONTHS for t in tokens)
        or _DATE_SHAPE_RE.search(answer_text)
        or (_YEAR_RE.search(answer_text) and len(tokens) <= 3)
    ):
        return "date"
    digit_tokens = sum(1 for t in tokens if any(c.isdigit() for c in t))
    word_numbers = sum(1 for t in tokens if t in _NUMBER_WORDS)
    if digit_tokens + word_numbers >= max(1, len(tokens) / 2):
        return "numeric"
    content = [t for t in raw_tokens if t.lower() not in ("of", "and", "de")]
    capitalized = sum(1 for t in content if t[:1].isupper())
    if content and capitalized >= max(1, len(content) / 2):
        return "proper_noun"
    first = tokens[0]
    if first.endswith("ing") or first.endswith("ed") or first in (
        "be", "being", "been", "do", "make", "take", "give", "get", "go",
    ):
        return "verb_phrase"
    if any(t.isalpha() for t in tokens):
        return "common_noun"
    return "other"


def _prefix_tree(questions: Sequence[QuestionRecord], depth: int = 3) -> dict:
    """Nested counts of the first ``depth`` question tokens (surface forms,
    lowercased, punctuation stripped; articles kept)."""
    root: dict = {"count": 0, "children": {}}
    for question in questions:
        tokens = [
            t.strip(".,;:!?\"'()").lower() for t in question.text.split()
        ][:depth]
        node = root
        node["count"] += 1
        for token in tokens:
            if not token:
                continue
            child = node["children"].setdefault(
                token, {"count": 0, "children": {}}
            )
            child["count"] += 1
            node = child
    return root


def compute_stats(
    questions: Sequence[QuestionRecord],
    passages_by_id: Mapping[str, Passage],
) -> StatsReport:
    """Dataset statistics over a question collection.

    Word counts use raw whitespace tokens, matching how answer and question
    lengths are conventionally reported; the n-gram overlap uses the
    normalized tokens shared with the scoring pipeline.
    """
    if not questions:
        raise EmptyDataset("no questions to analyze")

    question_lengths = []
    answer_lengths = []
    overlaps = []
    wh_counts: Counter[str] = Counter()
    type_counts: Counter[str] = Counter()
    for question in questions:
        question_lengths.append(len(question.text.split()))
        answer_lengths.append(len(question.gold.text.split()))
        passage = passages_by_id[question.passage_id]
        overlaps.append(longest_ngram_overlap(passage.text, question.text))
        wh_counts[wh_word(question.text)] += 1
        type_counts[answer_type(question.gold.text)] += 1

    total = len(questions)
    return StatsReport(
        mean_question_words=sum(question_lengths) / total,
        mean_answer_words=sum(answer_lengths) / total,
        mean_longest_ngram_overlap=sum(overlaps) / total,
        ngram_overlap_histogram=dict(sorted(Counter(overlaps).items())),
        question_length_histogram=dict(sorted(Counter(question_lengths).items())),
        answer_length_histogram=dict(sorted(Counter(answer_lengths).items())),
        wh_distribution={
            wh: wh_counts.get(wh, 0) / total for wh in (*WH_WORDS, "other")
        },
        answer_type_distribution={
            t: type_counts.get(t, 0) / total for t in ANSWER_TYPES
        },
        question_prefix_tree=_prefix_tree(questions),
    )


def label_distribution(questions: Sequence[QuestionRecord]) -> dict[str, float]:
    """Fraction of questions carrying each comprehension label.

    Labels are not mutually exclusive, so fractions need not sum to 1.
    """
    if not questions:
        raise EmptyDataset("no questions to analyze")
    counts: Counter[str] = Counter()
    for question in questions:
        for label in question.labels:
            counts[label] += 1
    return {label: counts[label] / len(questions) for label in sorted(counts)}


def stats_to_json(report: StatsReport) -> dict:
    return {
        "mean_question_words": report.mean_question_words,
        "mean_answer_words": report.mean_answer_words,
        "mean_longest_ngram_overlap": report.mean_longest_ngram_overlap,
        "ngram_overlap_histogram": {
            str(k): v for k, v in report.ngram_overlap_histogram.items()
        },
        "question_length_histogram": {
            str(k): v for k, v in report.question_length_histogram.items()
        },
        "answer_length_histogram": {
            str(k): v for k, v in report.answer_length_histogram.items()
        },
        "wh_distribution": report.wh_distribution,
        "answer_type_distribution": report.answer_type_distribution,
        "question_prefix_tree": report.question_prefix_tree,
    }
