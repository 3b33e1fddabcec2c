"""Bias auditing toolkit for reference-based text-generation metrics."""

__version__ = "0.1.0"

from .core import Scorer, ScoreMatrix, Text, symmetrized_score, tokenize

__all__ = ["Scorer", "ScoreMatrix", "Text", "symmetrized_score", "tokenize",
           "__version__"]
