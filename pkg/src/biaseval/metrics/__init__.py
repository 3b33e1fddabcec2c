"""Scorer adapters and the metric registry used by the engine and CLI."""

from __future__ import annotations

import logging
from typing import Sequence

from ..core import Scorer, Text
from . import embedding as emb
from . import ngram

log = logging.getLogger(__name__)


class BleuScorer(Scorer):
    supports_multi_ref = True
    score_range = (0.0, 1.0)

    def __init__(self, max_n: int = 4, smoothing: str = "epsilon"):
        self.max_n = max_n
        self.smoothing = smoothing
        self.name = f"bleu-{max_n}"

    def score(self, hyp: Text, ref: Text) -> float:
        return ngram.bleu(hyp, [ref], self.max_n, self.smoothing)

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        return ngram.bleu(hyp, list(refs), self.max_n, self.smoothing)


class RougeNScorer(Scorer):
    symmetric = True  # single-pair F1 swaps P and R
    supports_multi_ref = True
    score_range = (0.0, 1.0)

    def __init__(self, n: int):
        self.n = n
        self.name = f"rouge-{n}"

    def score(self, hyp: Text, ref: Text) -> float:
        return ngram.rouge_n(hyp, [ref], self.n)

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        return ngram.rouge_n(hyp, list(refs), self.n)


class RougeLScorer(Scorer):
    symmetric = True
    supports_multi_ref = True
    score_range = (0.0, 1.0)
    name = "rouge-l"

    def score(self, hyp: Text, ref: Text) -> float:
        return ngram.rouge_l(hyp, [ref])

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        return ngram.rouge_l(hyp, list(refs))


class RougeSU4Scorer(Scorer):
    symmetric = True
    supports_multi_ref = True
    score_range = (0.0, 1.0)
    name = "rouge-su4"

    def score(self, hyp: Text, ref: Text) -> float:
        return ngram.rouge_su4(hyp, [ref])

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        return ngram.rouge_su4(hyp, list(refs))


class MeteorScorer(Scorer):
    supports_multi_ref = True
    score_range = (0.0, 1.0)

    def __init__(self, synonyms: dict[str, int] | None = None,
                 stemmer: str = "simple"):
        if synonyms is None:
            log.info("meteor: no synonym table, matching degrades to "
                     "exact+stem stages")
        self.synonyms = synonyms
        self.stemmer = stemmer
        self.name = "meteor"

    def score(self, hyp: Text, ref: Text) -> float:
        return ngram.meteor_lite(hyp, [ref], self.synonyms, self.stemmer)

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        return ngram.meteor_lite(hyp, list(refs), self.synonyms, self.stemmer)


class TerScorer(Scorer):
    supports_multi_ref = True
    name = "ter"

    def score(self, hyp: Text, ref: Text) -> float:
        return ngram.ter(hyp, [ref])

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        return ngram.ter(hyp, list(refs))


class CiderScorer(Scorer):
    symmetric = True
    supports_multi_ref = True

    def __init__(self, idf: ngram.IdfTable, max_n: int = 4, sigma: float = 6.0):
        self.idf = idf
        self.max_n = max_n
        self.sigma = sigma
        self.name = "cider"

    def score(self, hyp: Text, ref: Text) -> float:
        return ngram.cider(hyp, [ref], self.idf, self.max_n, self.sigma)

    def score_multi(self, hyp: Text, refs: Sequence[Text]) -> float:
        return ngram.cider(hyp, list(refs), self.idf, self.max_n, self.sigma)


class WmdScorer(Scorer):
    symmetric = True  # the transport problem is canonically ordered
    score_range = (0.0, 1.0)
    name = "wmd"

    def __init__(self, store: emb.EmbeddingStore):
        self.store = store

    def score(self, hyp: Text, ref: Text) -> float:
        return emb.wmd_score(hyp, ref, self.store)


class EmbeddingAverageScorer(Scorer):
    symmetric = True
    score_range = (-1.0, 1.0)
    name = "embavg"

    def __init__(self, store: emb.EmbeddingStore):
        self.store = store

    def score(self, hyp: Text, ref: Text) -> float:
        return emb.embedding_average(hyp, ref, self.store)


class VectorExtremaScorer(Scorer):
    symmetric = True
    score_range = (-1.0, 1.0)
    name = "vecext"

    def __init__(self, store: emb.EmbeddingStore):
        self.store = store

    def score(self, hyp: Text, ref: Text) -> float:
        return emb.vector_extrema(hyp, ref, self.store)


class GreedyMatchingScorer(Scorer):
    symmetric = True
    score_range = (-1.0, 1.0)
    name = "greedy"

    def __init__(self, store: emb.EmbeddingStore):
        self.store = store

    def score(self, hyp: Text, ref: Text) -> float:
        return emb.greedy_matching(hyp, ref, self.store)


class ExactMatchScorer(Scorer):
    """1.0 iff the raw strings are equal; handy as a bridge conformance baseline."""

    symmetric = True
    score_range = (0.0, 1.0)
    name = "exact"

    def score(self, hyp: Text, ref: Text) -> float:
        return 1.0 if hyp.raw == ref.raw else 0.0


class ConstantScorer(Scorer):
    symmetric = True

    def __init__(self, value: float = 0.5):
        self.value = value
        self.name = "constant"
        self.score_range = (value, value)

    def score(self, hyp: Text, ref: Text) -> float:
        return self.value


def available_metrics() -> list[str]:
    return ["bleu-1", "bleu-2", "bleu-3", "bleu-4", "rouge-1", "rouge-2",
            "rouge-l", "rouge-su4", "meteor", "ter", "cider", "wmd",
            "embavg", "vecext", "greedy", "exact", "constant"]


def make_scorer(name: str, embeddings: emb.EmbeddingStore | None = None,
                idf: ngram.IdfTable | None = None,
                synonyms: dict[str, int] | None = None) -> Scorer:
    """Build a native scorer by name (e.g. "bleu-4", "rouge-l", "wmd")."""
    key = name.lower()
    if key in ("bleu", "bleu-4"):
        return BleuScorer(4)
    if key.startswith("bleu-"):
        return BleuScorer(int(key.split("-", 1)[1]))
    if key in ("rouge-1", "rouge1"):
        return RougeNScorer(1)
    if key in ("rouge-2", "rouge2"):
        return RougeNScorer(2)
    if key in ("rouge-l", "rougel"):
        return RougeLScorer()
    if key in ("rouge-su4", "rougesu4"):
        return RougeSU4Scorer()
    if key == "meteor":
        return MeteorScorer(synonyms=synonyms)
    if key == "ter":
        return TerScorer()
    if key == "cider":
        if idf is None:
            raise ValueError("cider requires an idf table (--idf)")
        return CiderScorer(idf)
    if key in ("wmd", "embavg", "vecext", "greedy"):
        if embeddings is None:
            raise ValueError(f"{key} requires embeddings (--embeddings)")
        return {"wmd": WmdScorer, "embavg": EmbeddingAverageScorer,
                "vecext": VectorExtremaScorer,
                "greedy": GreedyMatchingScorer}[key](embeddings)
    if key == "exact":
        return ExactMatchScorer()
    if key == "constant":
        return ConstantScorer()
    raise ValueError(f"unknown metric {name!r} "
                     f"(available: {', '.join(available_metrics())})")
