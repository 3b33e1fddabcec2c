"""Shared domain types: tokenization, texts, the scorer contract, score matrices."""

from __future__ import annotations

import math
import re
from typing import Callable, Sequence

import numpy as np

from .errors import ScoreRangeError, ScorerError

# Words are \w+ runs; every other non-space character becomes its own token.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(raw: str) -> list[str]:
    """Lowercase and split into word/punctuation tokens.

    Punctuation characters are emitted as individual tokens, so
    "Don't stop" -> ["don", "'", "t", "stop"]. Empty input yields [].
    """
    return _TOKEN_RE.findall(raw.lower())


class Text:
    """A raw string together with its deterministic tokenization."""

    __slots__ = ("raw", "tokens")

    def __init__(self, raw: str):
        self.raw = raw
        self.tokens = tuple(tokenize(raw))

    def __eq__(self, other):
        return isinstance(other, Text) and self.raw == other.raw

    def __hash__(self):
        return hash(self.raw)

    def __repr__(self):
        return f"Text({self.raw!r})"


class Scorer:
    """Contract every metric satisfies: a deterministic pairwise score M(x, y).

    `symmetric` promises M(x,y) == M(y,x) exactly. `score_range`, when set,
    is a hard [lo, hi] bound on every output; violations are errors, never
    clamped. `single_flight` scorers are serialized by the engine.
    """

    name: str = "scorer"
    symmetric: bool = False
    supports_multi_ref: bool = False
    score_range: tuple[float, float] | None = None
    single_flight: bool = False

    def score(self, hyp: Text, ref: Text) -> float:
        raise NotImplementedError

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        """Metric's own multi-reference aggregation; only if supports_multi_ref."""
        raise ScorerError(f"{self.name} has no native multi-reference mode")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "symmetric": self.symmetric,
            "supports_multi_ref": self.supports_multi_ref,
            "score_range": list(self.score_range) if self.score_range else None,
        }

    def __repr__(self):
        return f"<Scorer {self.name}>"


class FunctionScorer(Scorer):
    """Wrap a plain callable (Text, Text) -> float as a Scorer."""

    def __init__(self, name: str, fn: Callable[[Text, Text], float],
                 symmetric: bool = False,
                 score_range: tuple[float, float] | None = None):
        self.name = name
        self._fn = fn
        self.symmetric = symmetric
        self.score_range = score_range

    def score(self, hyp: Text, ref: Text) -> float:
        return self._fn(hyp, ref)


def checked_score(scorer: Scorer, hyp: Text, ref: Text) -> float:
    """Call scorer.score and enforce finiteness and the declared range."""
    value = scorer.score(hyp, ref)
    value = float(value)
    if not math.isfinite(value):
        raise ScorerError(
            f"{scorer.name} returned non-finite value {value!r}",
            hyp=hyp.raw, ref=ref.raw)
    if scorer.score_range is not None:
        lo, hi = scorer.score_range
        if value < lo or value > hi:
            raise ScoreRangeError(
                f"{scorer.name} returned {value} outside declared range "
                f"[{lo}, {hi}] for hyp={hyp.raw!r} ref={ref.raw!r}")
    return value


def symmetrized_score(scorer: Scorer, x: Text, y: Text) -> float:
    """Matching score S(x, y) = (M(x,y) + M(y,x)) / 2.

    Symmetric scorers are called once. The average is exactly invariant
    under swapping x and y.
    """
    if scorer.symmetric:
        return checked_score(scorer, x, y)
    return 0.5 * (checked_score(scorer, x, y) + checked_score(scorer, y, x))


class ScoreMatrix:
    """Dense cache of pairwise S values: entry (i, j) = S(rows[i], cols[j])."""

    def __init__(self, rows: Sequence[Text], cols: Sequence[Text],
                 values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(rows), len(cols)):
            raise ValueError(
                f"matrix shape {values.shape} does not match "
                f"{len(rows)} rows x {len(cols)} cols")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ScorerError(
                f"non-finite score at row {bad[0]}, col {bad[1]}")
        self.rows = list(rows)
        self.cols = list(cols)
        self.values = values

    @classmethod
    def build(cls, scorer: Scorer, rows: Sequence[Text], cols: Sequence[Text],
              workers: int = 1) -> "ScoreMatrix":
        """Fill the matrix with symmetrized scores, optionally in parallel.

        Cell assignment is by index, so results are identical for any
        worker count.
        """
        values = np.empty((len(rows), len(cols)), dtype=np.float64)
        pairs = [(i, j) for i in range(len(rows)) for j in range(len(cols))]

        def compute(ij):
            i, j = ij
            try:
                return i, j, symmetrized_score(scorer, rows[i], cols[j])
            except Exception as exc:
                raise ScorerError(
                    f"{scorer.name} failed on pair "
                    f"({rows[i].raw!r}, {cols[j].raw!r}): {exc}",
                    hyp=rows[i].raw, ref=cols[j].raw) from exc

        if workers > 1 and not scorer.single_flight:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=workers) as pool:
                for i, j, v in pool.map(compute, pairs):
                    values[i, j] = v
        else:
            for ij in pairs:
                i, j, v = compute(ij)
                values[i, j] = v
        return cls(rows, cols, values)

    def lookup(self) -> Callable[[Text, Text], float]:
        """Return an S(row_text, col_text) callable backed by this matrix."""
        row_index = {t: i for i, t in enumerate(self.rows)}
        col_index = {t: j for j, t in enumerate(self.cols)}

        def s(row: Text, col: Text) -> float:
            return float(self.values[row_index[row], col_index[col]])

        return s
