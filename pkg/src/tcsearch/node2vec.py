"""Embedding initialization: biased second-order random walks plus skip-gram.

Walks follow the return/in-out bias scheme (1/p back to the previous node,
1 to a mutual neighbor, 1/q outward); the skip-gram trainer uses a single
vector table with negative sampling from the degree-biased sampler.  The
result is only a starting point for the temporal training stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingTable, random_table
from .graph import DeTemporalGraph, NegativeSampler

__all__ = ["WalkCorpus", "generate_walks", "sgns_pair_loss", "train_init"]

_REJECT_ROUNDS = 100


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _log_sigmoid(x):
    # equals -softplus(-x); never overflows
    x = np.asarray(x, dtype=np.float64)
    return np.minimum(x, 0.0) - np.log1p(np.exp(-np.abs(x)))


@dataclass(frozen=True)
class WalkCorpus:
    """Random-walk sentences over a de-temporal graph."""

    walks: tuple[np.ndarray, ...]
    node_count: int
    walk_length: int
    walks_per_node: int

    def __len__(self) -> int:
        return len(self.walks)


def _biased_step(
    g: DeTemporalGraph,
    prev: int,
    cur: int,
    p: float,
    q: float,
    rng: np.random.Generator,
) -> int:
    nbrs = g.neighbors(cur)
    w = np.full(nbrs.size, 1.0 / q)
    w[np.isin(nbrs, g.neighbors(prev), assume_unique=True)] = 1.0
    w[nbrs == prev] = 1.0 / p
    cum = np.cumsum(w)
    i = np.searchsorted(cum, rng.random() * cum[-1], side="right")
    return int(nbrs[min(i, nbrs.size - 1)])


def generate_walks(
    g: DeTemporalGraph,
    p: float = 1.0,
    q: float = 1.0,
    walk_length: int = 20,
    walks_per_node: int = 10,
    seed: int = 0,
) -> WalkCorpus:
    """Generate ``walks_per_node`` biased walks from every node.

    Each round visits start nodes in a fresh random order.  Isolated nodes
    yield length-1 walks.  Deterministic per seed.
    """
    if walk_length < 2:
        raise ValueError("walk_length must be >= 2")
    if walks_per_node < 1:
        raise ValueError("walks_per_node must be >= 1")
    if p <= 0 or q <= 0:
        raise ValueError("p and q must be positive")
    rng = np.random.default_rng(seed)
    walks: list[np.ndarray] = []
    for _ in range(walks_per_node):
        for start in rng.permutation(g.node_count):
            start = int(start)
            nbrs = g.neighbors(start)
            if nbrs.size == 0:
                walks.append(np.array([start], dtype=np.int64))
                continue
            walk = [start, int(nbrs[rng.integers(nbrs.size)])]
            while len(walk) < walk_length:
                walk.append(_biased_step(g, walk[-2], walk[-1], p, q, rng))
            walks.append(np.asarray(walk, dtype=np.int64))
    return WalkCorpus(
        walks=tuple(walks),
        node_count=g.node_count,
        walk_length=walk_length,
        walks_per_node=walks_per_node,
    )


def sgns_pair_loss(
    center: np.ndarray, context: np.ndarray, negatives: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Skip-gram loss and analytic gradients for one (center, context) pair.

    ``loss = -log sigmoid(c . o) - sum_k log sigmoid(-c . n_k)``.  Returns
    ``(loss, d_center, d_context, d_negatives)``.
    """
    negatives = np.atleast_2d(negatives) if negatives.size else negatives.reshape(0, center.size)
    s_pos = float(center @ context)
    s_neg = negatives @ center
    loss = -float(_log_sigmoid(s_pos)) - float(np.sum(_log_sigmoid(-s_neg)))
    g_pos = -_sigmoid(-s_pos)
    g_neg = _sigmoid(s_neg)
    d_center = g_pos * context + g_neg @ negatives
    d_context = g_pos * center
    d_negatives = np.outer(g_neg, center)
    return loss, d_center, d_context, d_negatives


def _walk_pairs(walk: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """(center, context) pairs within the window; degenerate same-node pairs
    are skipped (a node co-occurring with itself carries no signal)."""
    L = walk.size
    centers, contexts = [], []
    for i in range(L):
        for j in range(max(0, i - window), min(L, i + window + 1)):
            if j == i or walk[j] == walk[i]:
                continue
            centers.append(walk[i])
            contexts.append(walk[j])
    return (
        np.asarray(centers, dtype=np.int64),
        np.asarray(contexts, dtype=np.int64),
    )


def _draw_negatives(
    sampler: NegativeSampler,
    centers: np.ndarray,
    contexts: np.ndarray,
    count: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair negatives.  Draws colliding with either endpoint are redrawn;
    whatever still collides after the retry budget is dropped via the mask."""
    negs = sampler.draw((centers.size, count))
    bad = (negs == centers[:, None]) | (negs == contexts[:, None])
    rounds = 0
    while np.any(bad) and rounds < _REJECT_ROUNDS:
        idx = np.nonzero(bad)
        negs[idx] = sampler.draw(idx[0].size)
        bad = (negs == centers[:, None]) | (negs == contexts[:, None])
        rounds += 1
    return negs, ~bad


def train_init(
    corpus: WalkCorpus,
    sampler: NegativeSampler,
    dim: int = 128,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    learning_rate: float = 0.025,
    seed: int = 0,
    clip_norm: float = 5.0,
) -> EmbeddingTable:
    """Train skip-gram-with-negative-sampling embeddings over a walk corpus.

    Gradient steps are batched per walk with their joint norm clipped (tiny
    graphs otherwise blow up when a node keeps appearing as both positive and
    negative); decay entries stay at their initial value 1.0 (they are
    learned later).  ``epochs=0`` returns the seeded random initialization.
    """
    if not corpus.walks:
        raise ValueError("empty walk corpus")
    table = random_table(corpus.node_count, dim, seed)
    if epochs == 0:
        return table
    rng = np.random.default_rng((seed, 1))
    Z = table.vectors
    for _ in range(epochs):
        for wi in rng.permutation(len(corpus.walks)):
            centers, contexts = _walk_pairs(corpus.walks[wi], window)
            if centers.size == 0:
                continue
            negs, keep = _draw_negatives(sampler, centers, contexts, negatives)
            zc, zo = Z[centers], Z[contexts]
            zn = Z[negs]
            g_pos = -_sigmoid(-np.einsum("ij,ij->i", zc, zo))
            g_neg = _sigmoid(np.einsum("ij,ikj->ik", zc, zn)) * keep
            rows = np.concatenate([centers, contexts, negs.ravel()])
            ids, pos = np.unique(rows, return_inverse=True)
            acc = np.zeros((ids.size, dim))
            np_pairs = centers.size
            np.add.at(
                acc,
                pos[:np_pairs],
                g_pos[:, None] * zo + np.einsum("ik,ikj->ij", g_neg, zn),
            )
            np.add.at(acc, pos[np_pairs : 2 * np_pairs], g_pos[:, None] * zc)
            np.add.at(
                acc,
                pos[2 * np_pairs :],
                (g_neg[:, :, None] * zc[:, None, :]).reshape(-1, dim),
            )
            norm = float(np.sqrt(np.sum(acc**2)))
            if clip_norm > 0 and norm > clip_norm:
                acc *= clip_norm / norm
            Z[ids] -= learning_rate * acc
    return table
