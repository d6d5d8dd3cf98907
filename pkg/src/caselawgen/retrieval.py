"""Query-time search: cosine candidates, then MMR-diverse selection.

MMR greedily picks argmax over unselected candidates of
``lambda * sim(query, d) - (1 - lambda) * max(sim(d, s) for s in selected)``;
the first pick maximizes query similarity alone. ``mode="relevance"``
skips the diversity term (the pure-relevance ablation).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ParagraphRef
from .errors import DimensionMismatch, EmptyIndex, NoCandidates
from .indexer import VectorIndex
from .providers import EmbeddingProvider

_MODES = ("mmr", "relevance")


@dataclass
class RetrievalParams:
    k: int = 100
    fetch_k: int = 200
    lambda_: float = 0.5
    sim_threshold: float = 0.2
    mode: str = "mmr"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.fetch_k < self.k:
            raise ValueError("fetch_k must be >= k")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if not -1.0 <= self.sim_threshold <= 1.0:
            raise ValueError("sim_threshold must be in [-1, 1]")
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}")


@dataclass(frozen=True)
class ParagraphHit:
    ref: ParagraphRef
    query_similarity: float
    rank: int


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def mmr_select(
    query_vec: np.ndarray,
    candidates: list[tuple[ParagraphRef, np.ndarray]],
    k: int,
    lambda_: float,
) -> list[ParagraphRef]:
    """Greedy MMR over unit-norm candidate vectors.

    Returns min(k, len(candidates)) refs in selection order; score ties
    break toward the lower (judgment_id, number).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 0.0 <= lambda_ <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    if k == 0 or not candidates:
        return []

    order = sorted(range(len(candidates)), key=lambda i: candidates[i][0])
    refs = [candidates[i][0] for i in order]
    mat = np.vstack([np.asarray(candidates[i][1], dtype=np.float64) for i in order])
    q = np.asarray(query_vec, dtype=np.float64)
    query_sims = mat @ q

    selected: list[int] = []
    remaining = list(range(len(refs)))
    max_sim_to_selected = np.full(len(refs), -np.inf)
    while remaining and len(selected) < k:
        if not selected:
            scores = query_sims
        else:
            scores = lambda_ * query_sims - (1.0 - lambda_) * max_sim_to_selected
        # remaining is in ref order, so the first argmax is the tie-winner
        best = remaining[0]
        for i in remaining[1:]:
            if scores[i] > scores[best]:
                best = i
        selected.append(best)
        remaining.remove(best)
        pair_sims = mat @ mat[best]
        np.maximum(max_sim_to_selected, pair_sims, out=max_sim_to_selected)
    return [refs[i] for i in selected]


def top_candidates(
    index: VectorIndex,
    query_vec: np.ndarray,
    fetch_k: int,
    sim_threshold: float,
) -> list[tuple[ParagraphRef, float]]:
    """Records with cosine >= threshold, best fetch_k, ties by ref order."""
    sims = index.matrix.astype(np.float64) @ np.asarray(query_vec, dtype=np.float64)
    pool = [(index.records[i].ref, float(sims[i])) for i in range(len(index)) if sims[i] >= sim_threshold]
    pool.sort(key=lambda t: (-t[1], t[0]))
    return pool[:fetch_k]


def search(
    index: VectorIndex,
    query_text: str,
    params: RetrievalParams,
    embedder: EmbeddingProvider,
) -> list[ParagraphHit]:
    if len(index) == 0:
        raise EmptyIndex("index has no records")
    if not query_text.strip():
        raise ValueError("query must be non-empty")

    query_vec = embedder.embed_one(query_text)
    pool = top_candidates(index, query_vec, params.fetch_k, params.sim_threshold)
    if not pool:
        raise NoCandidates(
            f"no records scored >= {params.sim_threshold}; the query looks off-topic"
        )
    sim_by_ref = dict(pool)

    if params.mode == "relevance":
        chosen = [ref for ref, _ in pool[: params.k]]
    else:
        vec_by_ref = {r.ref: r.vector for r in index.records}
        candidates = [(ref, vec_by_ref[ref]) for ref, _ in pool]
        chosen = mmr_select(query_vec, candidates, params.k, params.lambda_)

    return [ParagraphHit(ref, sim_by_ref[ref], rank) for rank, ref in enumerate(chosen)]
