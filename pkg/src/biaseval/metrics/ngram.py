"""Native n-gram metrics: BLEU, ROUGE-1/2/L/SU4, METEOR-lite, TER, CIDEr.

All functions take tokenized `Text` inputs and are pure; scores depend only
on token identity and position, which makes BLEU/ROUGE/TER exactly invariant
under bijective token renamings applied to both sides.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..core import Text

log = logging.getLogger(__name__)

# Numerator substituted for zero clipped counts under "epsilon" smoothing.
BLEU_EPS = 1e-9

# Cap on how far a phrase may be moved by the TER shift search.
TER_MAX_SHIFT_DIST = 50


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    """Multiset of order-n token n-grams (empty for short inputs)."""
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class NGramProfile:
    """n-gram multiset of one text; total multiplicity is max(0, len-n+1)."""

    n: int
    counts: Counter = field(default_factory=Counter)

    @classmethod
    def of(cls, text: Text, n: int) -> "NGramProfile":
        return cls(n=n, counts=ngrams(text.tokens, n))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------

def bleu(hyp: Text, refs: Sequence[Text], max_n: int = 4,
         smoothing: str = "epsilon") -> float:
    """Sentence BLEU: geometric mean of clipped n-gram precisions x brevity penalty.

    Orders with no hypothesis n-grams are skipped. With "epsilon" smoothing a
    zero clipped count contributes BLEU_EPS to the numerator; with "none" it
    zeroes the whole score. Empty hypothesis scores 0.0.
    """
    if not refs:
        raise ValueError("bleu requires at least one reference")
    if smoothing not in ("epsilon", "none"):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    if not 1 <= max_n <= 4:
        raise ValueError("max_n must be in 1..4")
    h = hyp.tokens
    if not h:
        return 0.0

    log_sum = 0.0
    used = 0
    for n in range(1, max_n + 1):
        hyp_counts = ngrams(h, n)
        total = sum(hyp_counts.values())
        if total == 0:
            continue
        max_ref = Counter()
        for ref in refs:
            for gram, cnt in ngrams(ref.tokens, n).items():
                if cnt > max_ref[gram]:
                    max_ref[gram] = cnt
        clipped = sum(min(cnt, max_ref[gram]) for gram, cnt in hyp_counts.items())
        if clipped == 0:
            if smoothing == "none":
                return 0.0
            p = BLEU_EPS / total
        else:
            p = clipped / total
        log_sum += math.log(p)
        used += 1
    if used == 0:
        return 0.0

    c = len(h)
    r = _closest_ref_length(c, [len(ref.tokens) for ref in refs])
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_sum / used)


def _closest_ref_length(c: int, ref_lens: Sequence[int]) -> int:
    """Effective reference length: closest to c, ties broken toward shorter."""
    return min(ref_lens, key=lambda r: (abs(r - c), r))


# ---------------------------------------------------------------------------
# ROUGE family (F1 variants, max over references)
# ---------------------------------------------------------------------------

def _f1(overlap: int, hyp_total: int, ref_total: int) -> float:
    if hyp_total == 0 or ref_total == 0:
        return 0.0
    p = overlap / hyp_total
    r = overlap / ref_total
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def rouge_n(hyp: Text, refs: Sequence[Text], n: int) -> float:
    """ROUGE-N F1: clipped n-gram overlap; maximum over references."""
    if not refs:
        raise ValueError("rouge_n requires at least one reference")
    hyp_counts = ngrams(hyp.tokens, n)
    hyp_total = sum(hyp_counts.values())
    best = 0.0
    for ref in refs:
        ref_counts = ngrams(ref.tokens, n)
        overlap = sum(min(cnt, ref_counts[g]) for g, cnt in hyp_counts.items())
        best = max(best, _f1(overlap, hyp_total, sum(ref_counts.values())))
    return best


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hyp: Text, refs: Sequence[Text]) -> float:
    """ROUGE-L F1 from longest common subsequence; maximum over references."""
    if not refs:
        raise ValueError("rouge_l requires at least one reference")
    best = 0.0
    for ref in refs:
        lcs = _lcs_length(hyp.tokens, ref.tokens)
        best = max(best, _f1(lcs, len(hyp.tokens), len(ref.tokens)))
    return best


def _su4_units(tokens: Sequence[str], gap: int = 4) -> Counter:
    # Skip-bigrams with at most `gap` tokens in between, plus unigrams.
    units = Counter((t,) for t in tokens)
    for i in range(len(tokens)):
        for j in range(i + 1, min(len(tokens), i + gap + 2)):
            units[(tokens[i], tokens[j])] += 1
    return units


def rouge_su4(hyp: Text, refs: Sequence[Text]) -> float:
    """ROUGE-SU4 F1: skip-bigrams (max gap 4) plus unigrams; max over references."""
    if not refs:
        raise ValueError("rouge_su4 requires at least one reference")
    hyp_units = _su4_units(hyp.tokens)
    hyp_total = sum(hyp_units.values())
    best = 0.0
    for ref in refs:
        ref_units = _su4_units(ref.tokens)
        overlap = sum(min(cnt, ref_units[u]) for u, cnt in hyp_units.items())
        best = max(best, _f1(overlap, hyp_total, sum(ref_units.values())))
    return best


# ---------------------------------------------------------------------------
# METEOR-lite
# ---------------------------------------------------------------------------

def simple_stem(token: str) -> str:
    """Small deterministic plural stripper (s-stemmer style)."""
    if len(token) > 4 and token.endswith("ies") and not token.endswith(("eies", "aies")):
        return token[:-3] + "y"
    if len(token) > 3 and token.endswith("es") and not token.endswith(("aes", "ees", "oes")):
        return token[:-1]
    if len(token) > 3 and token.endswith("s") and not token.endswith(("us", "ss")):
        return token[:-1]
    return token


def load_synonyms(path) -> dict[str, int]:
    """Read a synonym table: one space-separated synonym set per line.

    Returns a token -> set-id map; tokens sharing an id are synonymous.
    """
    table: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        set_id = 0
        for line in fh:
            words = line.split()
            if len(words) < 2:
                continue
            for w in words:
                table.setdefault(w.lower(), set_id)
            set_id += 1
    return table


def meteor_lite(hyp: Text, refs: Sequence[Text],
                synonyms: dict[str, int] | None = None,
                stemmer: str = "simple") -> float:
    """Staged unigram matcher (exact -> stem -> synonym) with METEOR scoring.

    F-mean weights recall 9:1; fragmentation penalty 0.5 * (chunks/matches)^3.
    Maximum over references. Without a synonym table the third stage is
    skipped (the degradation is logged once by the caller loading the table).
    """
    if not refs:
        raise ValueError("meteor_lite requires at least one reference")
    if stemmer not in ("simple", "none"):
        raise ValueError(f"unknown stemmer {stemmer!r}")
    return max(_meteor_single(hyp.tokens, ref.tokens, synonyms, stemmer)
               for ref in refs)


def _meteor_single(h: Sequence[str], r: Sequence[str],
                   synonyms: dict[str, int] | None, stemmer: str) -> float:
    if not h or not r:
        return 0.0

    stages = [("exact", list(h), list(r))]
    if stemmer == "simple":
        stages.append(("stem", [simple_stem(t) for t in h],
                       [simple_stem(t) for t in r]))
    if synonyms is not None:
        stages.append(("syn",
                       [synonyms.get(t) for t in h],
                       [synonyms.get(t) for t in r]))

    matched_h: dict[int, int] = {}  # hyp index -> ref index
    used_r: set[int] = set()
    for _, h_keys, r_keys in stages:
        for i in range(len(h)):
            if i in matched_h or h_keys[i] is None:
                continue
            candidates = [j for j in range(len(r))
                          if j not in used_r and r_keys[j] == h_keys[i]]
            if not candidates:
                continue
            # Prefer the ref position continuing the previous aligned token,
            # otherwise the leftmost; keeps identical texts in one chunk.
            prev = matched_h.get(i - 1)
            if prev is not None and prev + 1 in candidates:
                j = prev + 1
            else:
                j = candidates[0]
            matched_h[i] = j
            used_r.add(j)

    m = len(matched_h)
    if m == 0:
        return 0.0
    precision = m / len(h)
    recall = m / len(r)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    chunks = 0
    prev_pair = None
    for i in sorted(matched_h):
        j = matched_h[i]
        if prev_pair is None or prev_pair != (i - 1, j - 1):
            chunks += 1
        prev_pair = (i, j)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# TER
# ---------------------------------------------------------------------------

def _edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1,
                           prev[j - 1] + (0 if x == y else 1)))
        prev = cur
    return prev[-1]


def _shift_candidates(hyp: list[str], ref: Sequence[str]):
    # Phrases of hyp that occur in ref at a different position, within the
    # shift-distance cap. Yields (hyp_start, ref_start, length) in scan order.
    for i in range(len(hyp)):
        for j in range(len(ref)):
            if i == j or abs(i - j) > TER_MAX_SHIFT_DIST:
                continue
            if hyp[i] != ref[j]:
                continue
            length = 1
            while (i + length < len(hyp) and j + length < len(ref)
                   and hyp[i + length] == ref[j + length]):
                length += 1
            yield i, j, length


def _ter_single(hyp: Sequence[str], ref: Sequence[str]) -> float:
    if not ref:
        raise ValueError("ter requires non-empty references")
    words = list(hyp)
    shifts = 0
    dist = _edit_distance(words, ref)
    while dist > 0:
        best_delta = 0
        best_words = None
        for i, j, length in _shift_candidates(words, ref):
            for sub_len in range(length, 0, -1):
                phrase = words[i:i + sub_len]
                removed = words[:i] + words[i + sub_len:]
                shifted = removed[:j] + phrase + removed[j:]
                delta = dist - _edit_distance(shifted, ref)
                # Strict improvement keeps the first (positionally earliest)
                # candidate among ties, independent of token identity.
                if delta > best_delta:
                    best_delta = delta
                    best_words = shifted
        if best_words is None:
            break
        words = best_words
        shifts += 1
        dist -= best_delta
    return (shifts + dist) / len(ref)


def ter(hyp: Text, refs: Sequence[Text]) -> float:
    """Translation edit rate with greedy phrase-shift search; min over references.

    Lower is better; 0.0 means the hypothesis equals a reference.
    """
    if not refs:
        raise ValueError("ter requires at least one reference")
    if any(not ref.tokens for ref in refs):
        raise ValueError("ter is undefined for an empty reference")
    return min(_ter_single(hyp.tokens, ref.tokens) for ref in refs)


# ---------------------------------------------------------------------------
# CIDEr
# ---------------------------------------------------------------------------

@dataclass
class IdfTable:
    """Document frequencies over reference sets plus the corpus size."""

    document_frequencies: dict[str, int]
    num_docs: int

    def __post_init__(self):
        if self.num_docs <= 0:
            raise ValueError("num_docs must be positive")
        for gram, freq in self.document_frequencies.items():
            if freq > self.num_docs:
                raise ValueError(
                    f"document frequency of {gram!r} exceeds num_docs")

    @classmethod
    def from_reference_sets(cls, reference_sets: Iterable[Sequence[Text]],
                            max_n: int = 4) -> "IdfTable":
        """One document per reference set; an n-gram counts once per document."""
        df: Counter = Counter()
        num_docs = 0
        for refs in reference_sets:
            num_docs += 1
            seen: set[tuple] = set()
            for ref in refs:
                for n in range(1, max_n + 1):
                    seen.update(ngrams(ref.tokens, n))
            for gram in seen:
                df[" ".join(gram)] += 1
        if num_docs == 0:
            raise ValueError("cannot build an idf table from zero documents")
        return cls(document_frequencies=dict(df), num_docs=num_docs)

    def weight(self, gram: tuple) -> float:
        df = self.document_frequencies.get(" ".join(gram), 0)
        return math.log(self.num_docs / max(1, df))

    # File form: flat JSON map of space-joined n-gram -> df, plus the
    # reserved key "num_docs".
    def save(self, path) -> None:
        payload = {"num_docs": self.num_docs}
        payload.update(sorted(self.document_frequencies.items()))
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False)

    @classmethod
    def load(cls, path) -> "IdfTable":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if "num_docs" not in payload:
            raise ValueError(f"{path}: missing reserved key 'num_docs'")
        num_docs = int(payload.pop("num_docs"))
        return cls(document_frequencies={k: int(v) for k, v in payload.items()},
                   num_docs=num_docs)


def cider(hyp: Text, refs: Sequence[Text], idf: IdfTable,
          max_n: int = 4, sigma: float = 6.0) -> float:
    """CIDEr: mean over n of length-penalized tf-idf cosine, averaged over refs, x10."""
    if not refs:
        raise ValueError("cider requires at least one reference")
    if not idf.document_frequencies:
        raise ValueError("cider requires a non-empty idf table")

    def tfidf_vec(tokens, n):
        vec = {g: cnt * idf.weight(g) for g, cnt in ngrams(tokens, n).items()}
        norm = math.sqrt(sum(v * v for v in sorted(vec.values())))
        return vec, norm

    total = 0.0
    for ref in refs:
        delta = len(hyp.tokens) - len(ref.tokens)
        penalty = math.exp(-(delta * delta) / (2.0 * sigma * sigma))
        acc = 0.0
        for n in range(1, max_n + 1):
            hv, hn = tfidf_vec(hyp.tokens, n)
            rv, rn = tfidf_vec(ref.tokens, n)
            if hn == 0.0 or rn == 0.0:
                continue
            dot = sum(v * rv[g] for g, v in sorted(hv.items()) if g in rv)
            acc += penalty * dot / (hn * rn)
        total += acc / max_n
    return 10.0 * total / len(refs)
