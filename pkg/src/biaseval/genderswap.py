"""Gender swapping and gendered-content detection over raw text.

Swaps are whole-token, preserve each token's capitalization pattern, and
leave spacing and punctuation untouched, so swapping is byte-stable on the
unchanged parts. Non-bijective pronouns ("his"/"him" both map to "her") are
handled by per-token disambiguation rules on the way back.
"""

from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .core import Text

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

# Tokens after which "her" is read as an object ("told her the story")
# rather than a possessive ("her arm"). Closed-class lookahead only.
HER_OBJECT_BOUNDARY = {
    "the", "a", "an", "this", "that", "these", "those", "some", "any", "no",
    "my", "your", "his", "its", "our", "their",
    "and", "or", "but", "nor", "so", "yet", "than", "as", "that", "if",
    "when", "while", "because", "then", "there", "here",
    "to", "at", "in", "on", "with", "for", "from", "by", "about", "of",
    "off", "up", "down", "out", "over", "into", "after", "before",
    "again", "too", "very", "not", "now", "once", "twice",
    "is", "was", "are", "were", "be", "been", "am", "will", "would", "can",
    "could", "may", "might", "did", "does", "do", "said", "says",
    "he", "she", "it", "they", "we", "i", "you",
    "back", "away", "along", "around", "home", "today", "yesterday",
    "tomorrow", "first", "last",
}


def _her_lookahead(next_token: str | None) -> str:
    """Resolve "her" -> "his" (possessive) or "him" (object) from one token."""
    if next_token is None or not next_token.isalpha():
        return "him"
    if next_token in HER_OBJECT_BOUNDARY:
        return "him"
    return "his"


_RULES = {"her_lookahead": _her_lookahead}


@dataclass
class AmbiguousRule:
    """A token whose counterpart depends on context.

    `candidates` are the opposite-gender forms the rule chooses between; in
    the other direction each candidate collapses onto `source` (his/him ->
    her), which is what makes round-trip swapping lossy.
    """

    source: str
    candidates: list[str]
    rule: str

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise ValueError(
                f"ambiguous source {self.source!r} needs >= 2 candidates")
        if self.rule not in _RULES:
            raise ValueError(f"unknown disambiguation rule {self.rule!r}")


@dataclass
class GenderLexicon:
    """Bidirectional gendered-word map with disambiguation rules."""

    bijective_pairs: list[tuple[str, str]]
    ambiguous_rules: list[AmbiguousRule] = field(default_factory=list)
    neutral_exceptions: list[str] = field(default_factory=list)
    # source side of ambiguous rules counts as female, candidates as male
    ambiguous_source_gender: str = "female"

    def __post_init__(self):
        seen: set[str] = set()
        for m, f in self.bijective_pairs:
            for tok in (m, f):
                if tok in seen:
                    raise ValueError(
                        f"token {tok!r} appears in more than one bijective pair")
                seen.add(tok)
        self._forward: dict[str, tuple[str, str]] = {}  # token -> (new, rule id)
        for m, f in self.bijective_pairs:
            self._forward[m] = (f, "bijective")
            self._forward[f] = (m, "bijective")
        self._ambiguous: dict[str, AmbiguousRule] = {}
        for rule in self.ambiguous_rules:
            for cand in rule.candidates:
                if cand in self._forward:
                    raise ValueError(
                        f"candidate {cand!r} conflicts with a bijective pair")
                self._forward[cand] = (rule.source, "collapse")
            self._ambiguous[rule.source] = rule
        male = {m for m, _ in self.bijective_pairs}
        female = {f for _, f in self.bijective_pairs}
        for rule in self.ambiguous_rules:
            if self.ambiguous_source_gender == "female":
                female.add(rule.source)
                male.update(rule.candidates)
            else:
                male.add(rule.source)
                female.update(rule.candidates)
        self.male_tokens = frozenset(male)
        self.female_tokens = frozenset(female)
        self._neutral = frozenset(self.neutral_exceptions)

    def counterpart(self, token: str, next_token: str | None):
        """(replacement, rule id) for a lowercase token, or None."""
        if token in self._neutral:
            return None
        if token in self._forward:
            return self._forward[token]
        rule = self._ambiguous.get(token)
        if rule is not None:
            return _RULES[rule.rule](next_token), rule.rule
        return None

    def without_ambiguous(self) -> "GenderLexicon":
        """The bijective sublexicon (swap is an involution on it)."""
        return GenderLexicon(bijective_pairs=list(self.bijective_pairs),
                             ambiguous_rules=[],
                             neutral_exceptions=list(self.neutral_exceptions))

    @classmethod
    def from_dict(cls, payload: dict) -> "GenderLexicon":
        return cls(
            bijective_pairs=[tuple(p) for p in payload["bijective_pairs"]],
            ambiguous_rules=[AmbiguousRule(**r)
                             for r in payload.get("ambiguous_rules", [])],
            neutral_exceptions=list(payload.get("neutral_exceptions", [])))

    @classmethod
    def load(cls, path) -> "GenderLexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_lexicon() -> GenderLexicon:
    """The bundled lexicon (WinoBias-style pairs plus pronoun rules)."""
    payload = json.loads(resources.files("biaseval")
                         .joinpath("data", "lexicon.json").read_text("utf-8"))
    return GenderLexicon.from_dict(payload)


@dataclass
class SwapReport:
    """Audit record of one swap: what changed and the gender hit counts."""

    replacements: list[tuple[int, str, str, str]]  # (position, old, new, rule)
    male_hits: int
    female_hits: int


def _recase(original: str, replacement: str) -> str:
    if len(original) > 1 and original.isupper():
        return replacement.upper()
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def detect_gender(text: Text, lexicon: GenderLexicon) -> tuple[int, int]:
    """(male_hits, female_hits): lexicon hits per gender in the text."""
    male = 0
    female = 0
    for token in text.tokens:
        if token in lexicon.male_tokens:
            male += 1
        elif token in lexicon.female_tokens:
            female += 1
    return male, female


def swap_gender(text: Text, lexicon: GenderLexicon) -> tuple[Text, SwapReport]:
    """Replace every gendered token with its opposite-gender counterpart.

    Returns the swapped text and a report listing each replacement with the
    rule that produced it (useful for the manual-review workflow).
    """
    matches = list(_TOKEN_RE.finditer(text.raw))
    lowered = [m.group().lower() for m in matches]
    out = []
    cursor = 0
    replacements = []
    for idx, match in enumerate(matches):
        token = lowered[idx]
        next_token = lowered[idx + 1] if idx + 1 < len(lowered) else None
        hit = lexicon.counterpart(token, next_token)
        if hit is None:
            continue
        new, rule = hit
        surface = _recase(match.group(), new)
        out.append(text.raw[cursor:match.start()])
        out.append(surface)
        cursor = match.end()
        replacements.append((idx, match.group(), surface, rule))
    out.append(text.raw[cursor:])
    male, female = detect_gender(text, lexicon)
    return Text("".join(out)), SwapReport(replacements=replacements,
                                          male_hits=male, female_hits=female)


def swap_dataset(dataset, lexicon: GenderLexicon):
    """Swap every hypothesis and reference of a meta-evaluation dataset.

    Human scores are copied unchanged; per-record reports are kept on the
    returned dataset's `swap_audit` as (example_id, system_id, part, report).
    """
    new_records = []
    audit = []
    for rec in dataset.records:
        hyp, rep = swap_gender(rec.hypothesis, lexicon)
        audit.append((rec.example_id, rec.system_id, "hypothesis", rep))
        refs = []
        for i, ref in enumerate(rec.references):
            swapped, rep = swap_gender(ref, lexicon)
            refs.append(swapped)
            audit.append((rec.example_id, rec.system_id, f"reference_{i}", rep))
        new_records.append(dataclasses.replace(
            rec, hypothesis=hyp, references=refs, human=dict(rec.human)))
    return dataclasses.replace(dataset, records=new_records, swap_audit=audit)
