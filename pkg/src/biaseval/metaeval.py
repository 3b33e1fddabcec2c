"""Meta-evaluation analyses: preference under gender swapping, example- and
system-level Spearman correlation with human judgments, top-k system curves."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Scorer, Text, checked_score
from .errors import DegenerateDataError
from .genderswap import GenderLexicon, detect_gender, swap_dataset, swap_gender

log = logging.getLogger(__name__)

SPEARMAN_PERMUTATIONS = 100000

# Metric scores closer than this are a tie in preference comparisons.
PREFERENCE_EQ_TOL = 1e-9


@dataclass
class Record:
    example_id: str
    system_id: str
    hypothesis: Text
    references: list[Text]
    human: dict[str, float]


@dataclass
class MetaEvalDataset:
    """Records of (example, system, hypothesis, references, human scores)."""

    name: str
    dimensions: list[str]
    records: list[Record]
    swap_audit: list | None = field(default=None, repr=False)

    def __post_init__(self):
        seen = set()
        dims = set(self.dimensions)
        for rec in self.records:
            key = (rec.example_id, rec.system_id)
            if key in seen:
                raise ValueError(f"duplicate record {key}")
            seen.add(key)
            if not rec.references:
                raise ValueError(f"record {key} has no references")
            if set(rec.human) != dims:
                raise ValueError(
                    f"record {key} dimensions {sorted(rec.human)} != "
                    f"{sorted(dims)}")

    @property
    def systems(self) -> list[str]:
        return sorted({rec.system_id for rec in self.records})

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dimensions": self.dimensions,
            "records": [{
                "example_id": rec.example_id,
                "system_id": rec.system_id,
                "hypothesis": rec.hypothesis.raw,
                "references": [ref.raw for ref in rec.references],
                "human": rec.human,
            } for rec in self.records],
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, ensure_ascii=False, indent=2,
                      sort_keys=True)
            fh.write("\n")


def dataset_from_dict(payload: dict) -> MetaEvalDataset:
    records = [Record(example_id=str(r["example_id"]),
                      system_id=str(r["system_id"]),
                      hypothesis=Text(r["hypothesis"]),
                      references=[Text(ref) for ref in r["references"]],
                      human={k: float(v) for k, v in r["human"].items()})
               for r in payload["records"]]
    return MetaEvalDataset(name=payload["name"],
                           dimensions=list(payload["dimensions"]),
                           records=records)


def load_dataset(path) -> MetaEvalDataset:
    with open(path, encoding="utf-8") as fh:
        return dataset_from_dict(json.load(fh))


def import_flickr8k_style(path, name: str = "flickr8k") -> MetaEvalDataset:
    """Per-image multi-judge layout -> schema; judge scores are averaged.

    Expected rows: {"image_id", "hypothesis", "references": [...],
    "judgments": [j1, j2, ...]} with one hypothesis per image, JSON list or
    JSONL. System id defaults to "candidate" unless rows carry "system_id".
    """
    rows = _read_rows(path)
    records = []
    for row in rows:
        judgments = [float(j) for j in row["judgments"]]
        records.append(Record(
            example_id=str(row["image_id"]),
            system_id=str(row.get("system_id", "candidate")),
            hypothesis=Text(row["hypothesis"]),
            references=[Text(r) for r in row["references"]],
            human={"overall": sum(judgments) / len(judgments)}))
    return MetaEvalDataset(name=name, dimensions=["overall"], records=records)


def import_summeval_style(path, name: str = "summeval") -> MetaEvalDataset:
    """Per-system multi-dimension layout -> schema; expert scores averaged.

    Expected rows: {"id", "model_id", "decoded", "references": [...],
    "expert_annotations": [{dim: score, ...}, ...]}.
    """
    rows = _read_rows(path)
    records = []
    dims: list[str] | None = None
    for row in rows:
        annotations = row["expert_annotations"]
        if dims is None:
            dims = sorted(annotations[0])
        human = {d: sum(float(a[d]) for a in annotations) / len(annotations)
                 for d in dims}
        records.append(Record(
            example_id=str(row["id"]),
            system_id=str(row["model_id"]),
            hypothesis=Text(row["decoded"]),
            references=[Text(r) for r in row["references"]],
            human=human))
    return MetaEvalDataset(name=name, dimensions=dims or [], records=records)


def _read_rows(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    text = text.lstrip()
    if text.startswith("["):
        return json.loads(text)
    return [json.loads(line) for line in text.splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# Spearman correlation
# ---------------------------------------------------------------------------

@dataclass
class CorrelationResult:
    rho: float
    p_value: float
    n: int

    def significant(self, alpha: float = 0.01) -> bool:
        return self.p_value <= alpha


def _ranks(values: Sequence[float], ties: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr), dtype=np.float64)
    ranks[order] = np.arange(1, len(arr) + 1)
    if ties == "average":
        from scipy.stats import rankdata
        ranks = rankdata(arr, method="average")
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float], seed: int = 0,
             ties: str = "ordinal") -> CorrelationResult:
    """Spearman rho with a two-sided permutation p-value (100000 shuffles).

    Ties are ranked by first occurrence ("ordinal", the default used by all
    built-in analyses) or shared-mean ("average"). Constant input on either
    side makes rho undefined.
    """
    if len(xs) != len(ys):
        raise ValueError("spearman requires equal-length inputs")
    n = len(xs)
    if n < 3:
        raise ValueError("spearman requires at least 3 points")
    if len(set(map(float, xs))) == 1 or len(set(map(float, ys))) == 1:
        raise DegenerateDataError("rho undefined: zero rank variance")
    rx = _ranks(xs, ties)
    ry = _ranks(ys, ties)
    rx_c = rx - rx.mean()
    ry_c = ry - ry.mean()
    denom = float(np.sqrt((rx_c * rx_c).sum() * (ry_c * ry_c).sum()))
    rho = float((rx_c * ry_c).sum() / denom)

    rng = np.random.Generator(np.random.Philox(seed))
    threshold = abs(rho)
    hits = 0
    remaining = SPEARMAN_PERMUTATIONS
    while remaining > 0:
        chunk = min(remaining, max(1, 4_000_000 // max(n, 1)))
        order = np.argsort(rng.random((chunk, n)), axis=1)
        # sum rx_c * permuted(ry) equals the centered cross term because
        # rx_c sums to zero.
        cross = ry[order] @ rx_c
        hits += int((np.abs(cross / denom) >= threshold).sum())
        remaining -= chunk
    p = (1 + hits) / (SPEARMAN_PERMUTATIONS + 1)
    return CorrelationResult(rho=rho, p_value=p, n=n)


# ---------------------------------------------------------------------------
# Multi-reference aggregation
# ---------------------------------------------------------------------------

AGGREGATION_MODES = ("max", "mean", "native")


def aggregate_multi_ref(scorer: Scorer, hyp: Text, references: Sequence[Text],
                        mode: str = "max") -> float:
    """Score hyp against several references: max, mean, or the metric's own rule."""
    if not references:
        raise ValueError("aggregate_multi_ref requires references")
    if mode == "native":
        if not scorer.supports_multi_ref:
            raise ValueError(
                f"{scorer.name} does not support native multi-reference scoring")
        return float(scorer.score_multi(hyp, list(references)))
    scores = [checked_score(scorer, hyp, ref) for ref in references]
    if mode == "max":
        return max(scores)
    if mode == "mean":
        return sum(scores) / len(scores)
    raise ValueError(f"unknown aggregation mode {mode!r}")


# ---------------------------------------------------------------------------
# Preference analysis
# ---------------------------------------------------------------------------

@dataclass
class PreferenceReport:
    """Male vs gender-swapped hypothesis scores on gender-neutral references."""

    n: int
    male_mean: float | None
    female_mean: float | None
    prop_gt: float | None
    prop_lt: float | None
    prop_eq: float | None
    empty: bool = False


def _male_only_hypothesis(rec: Record, lexicon: GenderLexicon) -> bool:
    male, female = detect_gender(rec.hypothesis, lexicon)
    return male >= 1 and female == 0


def _neutral_references(rec: Record, lexicon: GenderLexicon) -> bool:
    return all(detect_gender(ref, lexicon) == (0, 0) for ref in rec.references)


def preference_analysis(dataset: MetaEvalDataset, scorer: Scorer,
                        lexicon: GenderLexicon,
                        mode: str = "max") -> PreferenceReport:
    """Compare metric scores for male vs swapped hypotheses.

    Qualifying records: every reference free of gendered words and the
    hypothesis containing male-related words only. References are left
    unchanged; only the hypothesis is swapped.
    """
    qualifying = [rec for rec in dataset.records
                  if _neutral_references(rec, lexicon)
                  and _male_only_hypothesis(rec, lexicon)]
    if not qualifying:
        return PreferenceReport(n=0, male_mean=None, female_mean=None,
                                prop_gt=None, prop_lt=None, prop_eq=None,
                                empty=True)
    male_scores = []
    female_scores = []
    for rec in qualifying:
        swapped, _ = swap_gender(rec.hypothesis, lexicon)
        male_scores.append(aggregate_multi_ref(scorer, rec.hypothesis,
                                               rec.references, mode))
        female_scores.append(aggregate_multi_ref(scorer, swapped,
                                                 rec.references, mode))
    n = len(qualifying)
    gt = sum(1 for m, f in zip(male_scores, female_scores)
             if m - f > PREFERENCE_EQ_TOL)
    lt = sum(1 for m, f in zip(male_scores, female_scores)
             if f - m > PREFERENCE_EQ_TOL)
    eq = n - gt - lt
    return PreferenceReport(n=n,
                            male_mean=sum(male_scores) / n,
                            female_mean=sum(female_scores) / n,
                            prop_gt=gt / n, prop_lt=lt / n, prop_eq=eq / n)


# ---------------------------------------------------------------------------
# Correlation analyses
# ---------------------------------------------------------------------------

def _metric_scores(dataset: MetaEvalDataset, scorer: Scorer,
                   mode: str) -> list[float]:
    return [aggregate_multi_ref(scorer, rec.hypothesis, rec.references, mode)
            for rec in dataset.records]


def _filtered(dataset: MetaEvalDataset, which: str,
              lexicon: GenderLexicon | None) -> MetaEvalDataset:
    if which == "all":
        return dataset
    if which != "male_only":
        raise ValueError(f"unknown filter {which!r}")
    if lexicon is None:
        raise ValueError("male_only filter requires a lexicon")
    records = [rec for rec in dataset.records
               if _male_only_hypothesis(rec, lexicon)]
    if not records:
        raise ValueError("empty after filter")
    return dataclasses.replace(dataset, records=records, swap_audit=None)


def example_level_correlation(dataset: MetaEvalDataset, scorer: Scorer,
                              dimension: str, mode: str = "max",
                              which: str = "all",
                              lexicon: GenderLexicon | None = None,
                              seed: int = 0) -> CorrelationResult:
    """Spearman between per-record metric scores and one human dimension."""
    if dimension not in dataset.dimensions:
        raise ValueError(f"unknown dimension {dimension!r}")
    data = _filtered(dataset, which, lexicon)
    metric = _metric_scores(data, scorer, mode)
    human = [rec.human[dimension] for rec in data.records]
    return spearman(metric, human, seed=seed)


def _system_means(dataset: MetaEvalDataset, scorer: Scorer, dimension: str,
                  mode: str) -> tuple[list[str], list[float], list[float]]:
    by_system: dict[str, list[Record]] = {}
    for rec in dataset.records:
        by_system.setdefault(rec.system_id, []).append(rec)
    systems = sorted(by_system)
    metric_means = []
    human_means = []
    for sys_id in systems:
        recs = by_system[sys_id]
        scores = [aggregate_multi_ref(scorer, r.hypothesis, r.references, mode)
                  for r in recs]
        metric_means.append(sum(scores) / len(scores))
        human_means.append(sum(r.human[dimension] for r in recs) / len(recs))
    return systems, metric_means, human_means


def system_level_correlation(dataset: MetaEvalDataset, scorer: Scorer,
                             dimension: str, mode: str = "mean",
                             seed: int = 0) -> CorrelationResult:
    """Spearman over per-system means of metric scores and human scores."""
    if dimension not in dataset.dimensions:
        raise ValueError(f"unknown dimension {dimension!r}")
    systems, metric_means, human_means = _system_means(
        dataset, scorer, dimension, mode)
    if len(systems) < 3:
        raise ValueError("system-level correlation needs at least 3 systems")
    return spearman(metric_means, human_means, seed=seed)


def topk_system_curve(dataset: MetaEvalDataset, scorer: Scorer,
                      dimension: str, mode: str = "mean",
                      k_values: Sequence[int] = (),
                      seed: int = 0) -> list[tuple[int, float]]:
    """System-level rho restricted to the top-k systems by human judgment.

    Systems are ranked by mean human score (ties broken by system id);
    k values below 3 are skipped with a warning, values above the system
    count are errors.
    """
    if dimension not in dataset.dimensions:
        raise ValueError(f"unknown dimension {dimension!r}")
    by_system: dict[str, list[Record]] = {}
    for rec in dataset.records:
        by_system.setdefault(rec.system_id, []).append(rec)
    num_systems = len(by_system)
    ranked = sorted(
        by_system,
        key=lambda s: (-(sum(r.human[dimension] for r in by_system[s])
                         / len(by_system[s])), s))
    curve = []
    for k in k_values:
        if k < 3:
            log.warning("top-k curve: skipping k=%d (needs k >= 3)", k)
            continue
        if k > num_systems:
            raise ValueError(f"k={k} exceeds the {num_systems} systems")
        keep = set(ranked[:k])
        subset = [rec for rec in dataset.records if rec.system_id in keep]
        sub = dataclasses.replace(dataset, records=subset, swap_audit=None)
        result = system_level_correlation(sub, scorer, dimension, mode,
                                          seed=seed)
        curve.append((k, result.rho))
    return curve


def compare_origin_swap(dataset: MetaEvalDataset, scorer: Scorer,
                        dimension: str, mode: str, level: str,
                        lexicon: GenderLexicon, which: str = "all",
                        seed: int = 0):
    """Run a correlation on the dataset and its gender-swapped twin.

    Returns (origin, swapped, delta) with delta = swapped.rho - origin.rho.
    The male_only filter is decided on the original hypotheses and the same
    record subset is used on both sides.
    """
    if level not in ("example", "system"):
        raise ValueError(f"unknown level {level!r}")
    base = _filtered(dataset, which, lexicon) if level == "example" else dataset
    swapped_ds = swap_dataset(base, lexicon)
    if level == "example":
        origin = example_level_correlation(base, scorer, dimension, mode,
                                           "all", seed=seed)
        swapped = example_level_correlation(swapped_ds, scorer, dimension,
                                            mode, "all", seed=seed)
    else:
        origin = system_level_correlation(base, scorer, dimension, mode,
                                          seed=seed)
        swapped = system_level_correlation(swapped_ds, scorer, dimension,
                                           mode, seed=seed)
    return origin, swapped, swapped.rho - origin.rho
