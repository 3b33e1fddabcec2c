"""Static-embedding metrics: WMD, embedding average, vector extrema, greedy matching."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..core import Text
from ..errors import NoComparableContentError

log = logging.getLogger(__name__)


class EmbeddingStore:
    """Immutable token -> vector map; keys are lowercase."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray], skipped: int = 0):
        if dim <= 0:
            raise ValueError("embedding dimension must be positive")
        for tok, vec in vectors.items():
            if vec.shape != (dim,) or not np.all(np.isfinite(vec)):
                raise ValueError(f"bad vector for token {tok!r}")
        self.dim = dim
        self.vectors = vectors
        self.skipped = skipped

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, token: str) -> np.ndarray | None:
        return self.vectors.get(token.lower())

    def filter_tokens(self, text: Text) -> list[str]:
        """In-vocabulary tokens of the text, in order, OOV dropped."""
        return [t for t in text.tokens if t in self.vectors]


def load_embeddings(path, expected_dim: int | None = None) -> EmbeddingStore:
    """Load word2vec-style text vectors ("token v1 .. vd" per line).

    An optional first line "count dim" is accepted. Malformed rows are
    skipped and counted; duplicates keep the first occurrence.
    """
    vectors: dict[str, np.ndarray] = {}
    dim = expected_dim
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        lines = []
        parts = first.split()
        if len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
            if expected_dim is not None and int(parts[1]) != expected_dim:
                raise ValueError(
                    f"{path}: header dim {parts[1]} != expected {expected_dim}")
            dim = dim or int(parts[1])
        elif first.strip():
            lines.append(first)
        lines.extend(fh)

    for line in lines:
        parts = line.rstrip("\n").split(" ")
        if len(parts) < 2:
            skipped += 1
            continue
        token = parts[0].lower()
        try:
            vec = np.array([float(v) for v in parts[1:] if v != ""],
                           dtype=np.float64)
        except ValueError:
            skipped += 1
            continue
        if dim is None:
            dim = len(vec)
        if len(vec) != dim or not np.all(np.isfinite(vec)):
            skipped += 1
            continue
        if token not in vectors:
            vectors[token] = vec
    if not vectors:
        raise ValueError(f"{path}: no usable embedding rows")
    if skipped:
        log.warning("%s: skipped %d malformed embedding rows", path, skipped)
    return EmbeddingStore(dim=dim, vectors=vectors, skipped=skipped)


@dataclass
class TransportPlan:
    """Optimal coupling between two token mass distributions."""

    source_tokens: list[str]
    target_tokens: list[str]
    flows: np.ndarray  # shape (len(source), len(target)), nonnegative
    cost: float

    def check_marginals(self, source_mass, target_mass, tol: float = 1e-9):
        if not (np.allclose(self.flows.sum(axis=1), source_mass, atol=tol)
                and np.allclose(self.flows.sum(axis=0), target_mass, atol=tol)):
            raise ValueError("transport plan marginals violated")


def _bag(store: EmbeddingStore, text: Text):
    counts = Counter(store.filter_tokens(text))
    tokens = sorted(counts)
    total = sum(counts.values())
    masses = np.array([counts[t] / total for t in tokens]) if total else np.array([])
    return tokens, masses


def wmd_transport(x: Text, y: Text, store: EmbeddingStore) -> TransportPlan:
    """Exact optimal transport between the two normalized bags of words.

    Ground cost is the Euclidean distance between embeddings; OOV tokens are
    dropped first. Solved as an LP on the bipartite graph; the two sides are
    canonically ordered before solving so the cost is exactly symmetric.
    """
    x_tokens, x_mass = _bag(store, x)
    y_tokens, y_mass = _bag(store, y)
    if not x_tokens and not y_tokens:
        raise NoComparableContentError(
            f"no comparable content: {x.raw!r} vs {y.raw!r} are fully "
            "out of vocabulary")
    if not x_tokens or not y_tokens:
        raise NoComparableContentError(
            "one side is empty after out-of-vocabulary filtering")

    if x_tokens == y_tokens and np.array_equal(x_mass, y_mass):
        # Identity transport is optimal between identical distributions.
        return TransportPlan(x_tokens, y_tokens, np.diag(x_mass), 0.0)

    swapped = (y_tokens, tuple(y_mass)) < (x_tokens, tuple(x_mass))
    src_tokens, src_mass = (y_tokens, y_mass) if swapped else (x_tokens, x_mass)
    tgt_tokens, tgt_mass = (x_tokens, x_mass) if swapped else (y_tokens, y_mass)

    src_vecs = np.stack([store.get(t) for t in src_tokens])
    tgt_vecs = np.stack([store.get(t) for t in tgt_tokens])
    diff = src_vecs[:, None, :] - tgt_vecs[None, :, :]
    cost_matrix = np.sqrt((diff * diff).sum(axis=2))

    m, n = len(src_tokens), len(tgt_tokens)
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([src_mass, tgt_mass])
    res = linprog(cost_matrix.ravel(), A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    flows = res.x.reshape(m, n)
    cost = max(0.0, float(res.fun))
    if swapped:
        return TransportPlan(tgt_tokens, src_tokens, flows.T, cost)
    return TransportPlan(src_tokens, tgt_tokens, flows, cost)


def wmd_distance(x: Text, y: Text, store: EmbeddingStore) -> float:
    """Word mover's distance (exact); 0.0 for identical bags."""
    return wmd_transport(x, y, store).cost


def wmd_score(x: Text, y: Text, store: EmbeddingStore) -> float:
    """Similarity orientation of WMD: 1 / (1 + distance), in (0, 1]."""
    return 1.0 / (1.0 + wmd_distance(x, y, store))


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for a zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _vectors(store: EmbeddingStore, text: Text) -> np.ndarray:
    tokens = store.filter_tokens(text)
    if not tokens:
        raise NoComparableContentError(
            f"{text.raw!r} has no in-vocabulary tokens")
    return np.stack([store.get(t) for t in tokens])


def embedding_average(x: Text, y: Text, store: EmbeddingStore) -> float:
    """Cosine similarity of the mean embedding vectors of the two texts."""
    return _cosine(_vectors(store, x).mean(axis=0),
                   _vectors(store, y).mean(axis=0))


def _extrema(vectors: np.ndarray) -> np.ndarray:
    # Per dimension: the value with the largest magnitude, ties toward the
    # positive value.
    out = np.empty(vectors.shape[1])
    for d in range(vectors.shape[1]):
        col = vectors[:, d]
        peak = np.abs(col).max()
        out[d] = col[np.abs(col) == peak].max()
    return out


def vector_extrema(x: Text, y: Text, store: EmbeddingStore) -> float:
    """Cosine similarity of per-dimension extrema vectors."""
    return _cosine(_extrema(_vectors(store, x)), _extrema(_vectors(store, y)))


def greedy_matching(x: Text, y: Text, store: EmbeddingStore) -> float:
    """Average best-cosine match in both directions; symmetric by construction."""
    xv = _vectors(store, x)
    yv = _vectors(store, y)
    norms_x = np.linalg.norm(xv, axis=1)
    norms_y = np.linalg.norm(yv, axis=1)
    if np.any(norms_x == 0.0) or np.any(norms_y == 0.0):
        raise ValueError("cosine undefined for a zero-norm vector")
    sims = np.clip((xv / norms_x[:, None]) @ (yv / norms_y[:, None]).T, -1.0, 1.0)
    forward = float(sims.max(axis=1).mean())
    backward = float(sims.max(axis=0).mean())
    return 0.5 * (forward + backward)
