"""Online community search: candidate space, scoring, and greedy expansion.

Given query nodes, the candidate space is the union of every partition
subgraph touching the query plus each such subgraph's top-k most similar
peers (cosine similarity of centroid embeddings).  Candidates are scored by
cosine similarity to the mean query embedding, and the community grows
greedily in score order while the centered score gain keeps increasing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .embedding import EmbeddingTable
from .graph import DeTemporalGraph
from .leiden import Partition
from .pretrain import compute_centroids

__all__ = [
    "Query",
    "CommunityResult",
    "topk_similar_subgraphs",
    "candidate_space",
    "community_scores",
    "ecsg",
    "greedy_expand",
    "online_search",
]


@dataclass(frozen=True, init=False)
class Query:
    """Non-empty set of query node ids, stored sorted and deduplicated."""

    nodes: tuple[int, ...]

    def __init__(self, nodes: Iterable[int]):
        uniq = tuple(sorted({int(v) for v in nodes}))
        if not uniq:
            raise ValueError("query must contain at least one node")
        object.__setattr__(self, "nodes", uniq)

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class CommunityResult:
    """Outcome of one greedy search."""

    query: Query
    members: tuple[int, ...]  # sorted; always contains the query
    scores: dict[int, float]  # candidate node -> cosine score
    trace: tuple[tuple[int, float], ...]  # (added node, gain after adding)
    candidate_size: int

    def member_set(self) -> frozenset[int]:
        return frozenset(self.members)


def _cosine_rows(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Cosine of each row of M against v; zero-norm rows or v give 0."""
    norms = np.linalg.norm(M, axis=1) * np.linalg.norm(v)
    dots = M @ v
    return np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)


def topk_similar_subgraphs(
    p: Partition, centroids: np.ndarray, i: int, k: int
) -> list[int]:
    """Ids of the k subgraphs whose centroids are most cosine-similar to i's.

    Ties break toward the smaller id; asking for more than K-1 returns all
    other subgraphs.
    """
    if not 0 <= i < p.subgraph_count:
        raise KeyError(f"subgraph {i} out of range")
    if k <= 0:
        return []
    sims = _cosine_rows(centroids, centroids[i])
    order = np.lexsort((np.arange(p.subgraph_count), -sims))
    ranked = [int(j) for j in order if j != i]
    return ranked[:k]


def candidate_space(
    q: Query, p: Partition, centroids: np.ndarray, k: int
) -> np.ndarray:
    """Sorted node ids of the local search scope for a query.

    The query itself, every subgraph intersecting it, and each such
    subgraph's top-k similar subgraphs.
    """
    out: set[int] = set(q.nodes)
    touched = sorted({int(p.assignment[v]) for v in q.nodes})
    for i in touched:
        out.update(p.members[i].tolist())
        for j in topk_similar_subgraphs(p, centroids, i, k):
            out.update(p.members[j].tolist())
    return np.array(sorted(out), dtype=np.int64)


def community_scores(
    table: EmbeddingTable, q: Query, candidates: np.ndarray
) -> dict[int, float]:
    """Cosine of every candidate's embedding against the mean query embedding."""
    zq = table.vectors[list(q.nodes)].mean(axis=0)
    vals = _cosine_rows(table.vectors[candidates], zq)
    return {int(v): float(s) for v, s in zip(candidates, vals)}


def ecsg(
    scores: Mapping[int, float],
    community: Iterable[int],
    g: DeTemporalGraph | None = None,
) -> float:
    """Centered community score gain: ``sum_c (s_v - mean) / sqrt(|C|)``.

    Zero for constant scores and invariant to adding a constant to every
    score.  The graph argument is accepted for signature compatibility with
    structure-aware variants and is not consulted.
    """
    members = list(community)
    if not members:
        raise ValueError("community must be non-empty")
    vals = np.fromiter(scores.values(), dtype=np.float64, count=len(scores))
    mean = float(vals.mean())
    total = 0.0
    for v in members:
        if v not in scores:
            raise KeyError(f"node {v} is not in the scored candidate space")
        total += scores[v] - mean
    return total / np.sqrt(len(members))


def greedy_expand(
    scores: Mapping[int, float], q: Query
) -> tuple[list[int], list[tuple[int, float]]]:
    """Grow the query by descending score while the centered gain increases.

    Candidates are visited in non-increasing score order (ties toward the
    smaller id); each is accepted while it strictly raises the centered score
    gain over the previous best, and the first rejection stops the search.
    Returns the member list and the (node, gain) acceptance trace.
    """
    cand = np.fromiter(scores.keys(), dtype=np.int64, count=len(scores))
    svals = np.fromiter(scores.values(), dtype=np.float64, count=len(scores))
    for v in q.nodes:
        if v not in scores:
            raise KeyError(f"query node {v} is outside the candidate space")
    mean = float(svals.mean())
    in_query = np.isin(cand, np.array(q.nodes))
    order = np.lexsort((cand[~in_query], -svals[~in_query]))
    ranked = cand[~in_query][order]

    members = list(q.nodes)
    centered = float(np.sum(svals[in_query] - mean))
    best = -np.inf
    trace: list[tuple[int, float]] = []
    for u in ranked:
        gain = (centered + scores[int(u)] - mean) / np.sqrt(len(members) + 1)
        if gain > best:
            best = gain
            centered += scores[int(u)] - mean
            members.append(int(u))
            trace.append((int(u), float(gain)))
        else:
            break
    return members, trace


def online_search(
    q: Query,
    g: DeTemporalGraph,
    p: Partition,
    table: EmbeddingTable,
    k: int = 2,
    centroids: np.ndarray | None = None,
) -> CommunityResult:
    """Greedy expansion of the query inside its candidate space.

    Read-only with respect to all inputs; concurrent queries over shared
    state are safe.
    """
    for v in q.nodes:
        if not 0 <= v < p.node_count:
            raise KeyError(f"query node {v} is not in the graph")
    if centroids is None:
        centroids = compute_centroids(table, p)
    cand = candidate_space(q, p, centroids, k)
    scores = community_scores(table, q, cand)
    members, trace = greedy_expand(scores, q)
    return CommunityResult(
        query=q,
        members=tuple(sorted(members)),
        scores=scores,
        trace=tuple(trace),
        candidate_size=int(cand.size),
    )
