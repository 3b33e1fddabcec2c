"""Association tests over any scorer: differential association, permutation
significance, and effect size, with word- and sentence-level test sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .core import Scorer, ScoreMatrix, Text
from .errors import ScorerError

# Above this many equal-size partitions the permutation test samples
# 99999 extra partitions with replacement instead of enumerating.
EXHAUSTIVE_PARTITION_LIMIT = 100000
SAMPLED_DRAWS = 99999

LEVELS = ("word", "sentence", "sentence_unbleached")

WORD_SLOT = "<word>"


@dataclass
class AssociationTestSpec:
    """Targets A/B, attributes X/Y, and the sentence templates of one test."""

    name: str
    targets_a: list[str]
    targets_b: list[str]
    attributes_x: list[str]
    attributes_y: list[str]
    level: str = "word"
    templates: list[str] = field(default_factory=list)
    variant: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.level not in LEVELS:
            raise ValueError(f"{self.name}: unknown level {self.level!r}")
        for label, items in (("targets_a", self.targets_a),
                             ("targets_b", self.targets_b),
                             ("attributes_x", self.attributes_x),
                             ("attributes_y", self.attributes_y)):
            if not items:
                raise ValueError(f"{self.name}: {label} is empty")
            if len(set(items)) != len(items):
                raise ValueError(f"{self.name}: duplicate entries in {label}")
        if len(self.attributes_x) != len(self.attributes_y):
            raise ValueError(
                f"{self.name}: |X| = {len(self.attributes_x)} != "
                f"|Y| = {len(self.attributes_y)}")
        if self.level != "word":
            if not self.templates:
                raise ValueError(f"{self.name}: sentence level needs templates")
            for tpl in self.templates:
                if WORD_SLOT not in tpl:
                    raise ValueError(
                        f"{self.name}: template {tpl!r} lacks {WORD_SLOT}")
        if self.variant not in (None, "names", "terms"):
            raise ValueError(f"{self.name}: bad variant {self.variant!r}")

    @classmethod
    def from_dict(cls, payload: dict) -> "AssociationTestSpec":
        return cls(name=payload["name"],
                   targets_a=list(payload["targets_a"]),
                   targets_b=list(payload["targets_b"]),
                   attributes_x=list(payload["attributes_x"]),
                   attributes_y=list(payload["attributes_y"]),
                   level=payload.get("level", "word"),
                   templates=list(payload.get("templates", [])),
                   variant=payload.get("variant"))

    def to_dict(self) -> dict:
        payload = {
            "name": self.name,
            "targets_a": self.targets_a,
            "targets_b": self.targets_b,
            "attributes_x": self.attributes_x,
            "attributes_y": self.attributes_y,
            "level": self.level,
            "templates": self.templates,
        }
        if self.variant:
            payload["variant"] = self.variant
        return payload

    def expand_item(self, item: str) -> list[Text]:
        """Texts an item contributes: itself (word) or its template sentences."""
        if self.level == "word":
            return [Text(item)]
        return [Text(tpl.replace(WORD_SLOT, item)) for tpl in self.templates]


def load_test_spec(path) -> AssociationTestSpec:
    with open(path, encoding="utf-8") as fh:
        return AssociationTestSpec.from_dict(json.load(fh))


def bundled_test_names() -> list[str]:
    root = resources.files("biaseval").joinpath("data", "tests")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled_test(name: str) -> AssociationTestSpec:
    root = resources.files("biaseval").joinpath("data", "tests")
    payload = json.loads(root.joinpath(f"{name}.json").read_text("utf-8"))
    return AssociationTestSpec.from_dict(payload)


@dataclass
class AssociationResult:
    """Differential association with its permutation p-value and effect size."""

    s_value: float
    p_value: float
    effect_size: float
    r_x: dict[str, float]
    r_y: dict[str, float]
    num_partitions: int
    sampled: bool
    seed: int

    def to_dict(self) -> dict:
        return {
            "s_value": self.s_value,
            "p_value": self.p_value,
            "effect_size": self.effect_size,
            "r_x": self.r_x,
            "r_y": self.r_y,
            "num_partitions": self.num_partitions,
            "sampled": self.sampled,
            "seed": self.seed,
        }


ScoreSource = Callable[[Text, Text], float]


def _check_finite(value: float, t: Text, other: Text) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ScorerError(f"non-finite score for ({t.raw!r}, {other.raw!r})",
                          hyp=t.raw, ref=other.raw)
    return value


def association_r(t: Text, group_a: Sequence[Text], group_b: Sequence[Text],
                  s: ScoreSource) -> float:
    """Mean matching score of t against A minus its mean against B."""
    if not group_a or not group_b:
        raise ValueError("association_r requires non-empty groups")
    sum_a = sum(_check_finite(s(t, a), t, a) for a in group_a)
    sum_b = sum(_check_finite(s(t, b), t, b) for b in group_b)
    return sum_a / len(group_a) - sum_b / len(group_b)


def differential_association(xs: Sequence[Text], ys: Sequence[Text],
                             group_a: Sequence[Text], group_b: Sequence[Text],
                             s: ScoreSource) -> float:
    """Sum of r over X minus sum of r over Y; antisymmetric in (X, Y)."""
    r_x = sum(association_r(x, group_a, group_b, s) for x in xs)
    r_y = sum(association_r(y, group_a, group_b, s) for y in ys)
    return r_x - r_y


def _partition_stat(r: Sequence[float], left: Sequence[int],
                    right: Sequence[int]) -> float:
    # Both sides summed in index order so the observed partition regenerates
    # the exact observed statistic.
    return sum(r[i] for i in left) - sum(r[j] for j in right)


def _pvalue_from_r(r: Sequence[float], n: int, seed: int,
                   force_sampled: bool = False) -> tuple[float, int, bool]:
    if n == 0:
        raise ValueError("permutation test needs at least one item per side")
    if len(r) != 2 * n:
        raise ValueError("r vector must have 2n entries")
    total = math.comb(2 * n, n)
    indices = range(2 * n)
    s_obs = _partition_stat(r, range(n), range(n, 2 * n))

    if total <= EXHAUSTIVE_PARTITION_LIMIT and not force_sampled:
        count = 0
        universe = set(indices)
        for left in combinations(indices, n):
            right = sorted(universe.difference(left))
            if _partition_stat(r, left, right) >= s_obs:
                count += 1
        return count / total, total, False

    rng = np.random.Generator(np.random.Philox(seed))
    r_arr = np.asarray(r, dtype=np.float64)

    def stats_for(index_rows: np.ndarray) -> np.ndarray:
        # Indices are sorted per side so every occurrence of the same
        # partition sums in one canonical order; exact ties (including
        # resamples of the observed partition) then compare reliably.
        left = np.sort(index_rows[:, :n], axis=1)
        right = np.sort(index_rows[:, n:], axis=1)
        return r_arr[left].sum(axis=1) - r_arr[right].sum(axis=1)

    s_obs_sampled = float(stats_for(np.arange(2 * n)[None, :])[0])
    count = 1  # the observed partition trivially satisfies >=
    remaining = SAMPLED_DRAWS
    while remaining > 0:
        chunk = min(remaining, 20000)
        order = np.argsort(rng.random((chunk, 2 * n)), axis=1)
        count += int((stats_for(order) >= s_obs_sampled).sum())
        remaining -= chunk
    return count / (SAMPLED_DRAWS + 1), total, True


def permutation_pvalue(xs: Sequence[Text], ys: Sequence[Text],
                       group_a: Sequence[Text], group_b: Sequence[Text],
                       s: ScoreSource, seed: int = 0,
                       force_sampled: bool = False) -> tuple[float, int, bool]:
    """P(s(Xi, Yi, A, B) >= s(X, Y, A, B)) over equal-size partitions of X u Y.

    All C(2n, n) partitions are enumerated when there are at most 100000;
    otherwise the observed partition plus 99999 partitions sampled uniformly
    with replacement (keyed by seed). Ties at exact equality count.
    """
    if len(xs) != len(ys):
        raise ValueError("permutation test requires |X| = |Y|")
    r = [association_r(t, group_a, group_b, s) for t in list(xs) + list(ys)]
    return _pvalue_from_r(r, len(xs), seed, force_sampled=force_sampled)


def _effect_size_from_r(r: Sequence[float], n: int) -> float:
    mean_x = sum(r[:n]) / n
    mean_y = sum(r[n:]) / n
    mu = sum(r) / len(r)
    var = sum((v - mu) ** 2 for v in r) / len(r)
    if var == 0.0:
        # Constant scorers (e.g. n-gram metrics on disjoint word sets) have
        # zero spread; report 0.00 rather than NaN.
        return 0.0
    return (mean_x - mean_y) / math.sqrt(var)


def effect_size(xs: Sequence[Text], ys: Sequence[Text],
                group_a: Sequence[Text], group_b: Sequence[Text],
                s: ScoreSource) -> float:
    """Standardized mean difference of r over X vs Y (population std dev)."""
    if len(list(xs)) + len(list(ys)) < 2:
        raise ValueError("effect size needs at least two items")
    if len(xs) != len(ys):
        raise ValueError("effect size requires |X| = |Y|")
    r = [association_r(t, group_a, group_b, s) for t in list(xs) + list(ys)]
    return _effect_size_from_r(r, len(xs))


def run_association_test(spec: AssociationTestSpec, scorer: Scorer,
                         seed: int = 0, workers: int = 1,
                         force_sampled: bool = False) -> AssociationResult:
    """Full s/p/d measurement of one test against one scorer.

    Items expand to texts per the test's level; each pairwise S value is the
    symmetrized score, computed once. At sentence level an item's r is the
    mean over its template instantiations.
    """
    x_items = [(item, spec.expand_item(item)) for item in spec.attributes_x]
    y_items = [(item, spec.expand_item(item)) for item in spec.attributes_y]
    target_texts = []
    for item in spec.targets_a:
        target_texts.extend(spec.expand_item(item))
    n_a = len(target_texts)
    for item in spec.targets_b:
        target_texts.extend(spec.expand_item(item))

    attribute_texts = [t for _, texts in x_items + y_items for t in texts]
    matrix = ScoreMatrix.build(scorer, attribute_texts, target_texts,
                               workers=workers)

    r_values: list[float] = []
    row = 0
    for _, texts in x_items + y_items:
        per_sentence = []
        for _ in texts:
            vals = matrix.values[row]
            r_sent = (sum(vals[:n_a]) / n_a
                      - sum(vals[n_a:]) / (len(target_texts) - n_a))
            per_sentence.append(float(r_sent))
            row += 1
        r_values.append(sum(per_sentence) / len(per_sentence))

    n = len(x_items)
    r_x = {item: r_values[i] for i, (item, _) in enumerate(x_items)}
    r_y = {item: r_values[n + i] for i, (item, _) in enumerate(y_items)}
    s_value = _partition_stat(r_values, range(n), range(n, 2 * n))
    p_value, num_partitions, sampled = _pvalue_from_r(
        r_values, n, seed, force_sampled=force_sampled)
    d = _effect_size_from_r(r_values, n)
    return AssociationResult(s_value=s_value, p_value=p_value, effect_size=d,
                             r_x=r_x, r_y=r_y, num_partitions=num_partitions,
                             sampled=sampled, seed=seed)
