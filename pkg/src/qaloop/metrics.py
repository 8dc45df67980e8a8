"""Answer-string normalization, token EM/F1, and the model-win rule.

The normalization pipeline follows the de-facto extractive-QA evaluator
convention: lowercase, delete punctuation characters, drop the articles
a/an/the, split on whitespace. Punctuation here means the ASCII punctuation
set plus every code point in a Unicode P* category, so behaviour is
deterministic across platforms while staying byte-compatible with the
reference evaluator on ASCII text.
"""

from __future__ import annotations

import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass

__all__ = [
    "AdjudicationPolicy",
    "MatchScore",
    "normalize",
    "f1",
    "em",
    "adjudicate",
]

_ARTICLES_RE = re.compile(r"\b(a|an|the)\b")

class _PunctTable(dict):
    """Deletion table for str.translate: ASCII punctuation plus Unicode P*.

    Code points outside the ASCII seed are classified lazily and cached, so
    importing this module stays cheap.
    """

    def __missing__(self, cp: int):
        keep = not unicodedata.category(chr(cp)).startswith("P")
        result = cp if keep else None
        self[cp] = result
        return result


_PUNCT_TABLE = _PunctTable({ord(ch): None for ch in string.punctuation})


@dataclass(frozen=True)
class AdjudicationPolicy:
    """Win rule parameters. ``win_threshold`` is the F1 fraction at or above
    which the model's answer counts as correct; ``match_threshold`` plays the
    same role for answerability validation."""

    win_threshold: float = 0.4
    match_threshold: float = 0.4

    def __post_init__(self):
        for name in ("win_threshold", "match_threshold"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class MatchScore:
    em: bool
    f1: float
    model_win: bool


def normalize(text: str) -> list[str]:
    """Lowercase, delete punctuation, remove articles, split on whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    return _ARTICLES_RE.sub(" ", text).split()


def f1(gold: str, pred: str) -> float:
    """Bag-of-tokens overlap F1 between two answer strings, in [0, 1].

    Two strings that both normalize to nothing count as a perfect match.
    """
    gold_tokens = normalize(gold)
    pred_tokens = normalize(pred)
    if not gold_tokens and not pred_tokens:
        return 1.0
    common = Counter(gold_tokens) & Counter(pred_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_tokens)
    recall = num_same / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def em(gold: str, pred: str) -> bool:
    """Exact match: normalized token sequences are identical."""
    return normalize(gold) == normalize(pred)


def adjudicate(
    human_answer: str, model_answer: str, policy: AdjudicationPolicy
) -> MatchScore:
    """Score a model answer against the human answer and apply the win rule.

    The model wins iff its overlap F1 reaches ``policy.win_threshold``
    (inclusive); the question is retained only when the model loses.
    """
    score = f1(human_answer, model_answer)
    return MatchScore(
        em=em(human_answer, model_answer),
        f1=score,
        model_win=score >= policy.win_threshold,
    )
