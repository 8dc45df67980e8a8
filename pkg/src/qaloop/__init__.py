"""Adversarial annotation platform for extractive QA with a model in the loop."""

from .metrics import AdjudicationPolicy, MatchScore, adjudicate, em, f1, normalize

__version__ = "0.1.0"

__all__ = [
    "AdjudicationPolicy",
    "MatchScore",
    "adjudicate",
    "em",
    "f1",
    "normalize",
    "__version__",
]
