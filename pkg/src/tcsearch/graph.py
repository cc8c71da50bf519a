"""Temporal graph containers, loaders, edge-stream batching, and negative sampling.

A temporal graph is a multiset of undirected timestamped edges ``(u, v, t)``;
the same node pair at two different times counts as two edges.  Dropping the
timestamps and deduplicating pairs yields the static (de-temporal) view used
for partitioning and random walks.
"""

from __future__ import annotations

import gzip
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import IO, Iterator

import numpy as np

__all__ = [
    "GraphFormatError",
    "TemporalGraph",
    "DeTemporalGraph",
    "EdgeBatch",
    "NegativeSampler",
    "load_temporal_graph",
    "save_graph",
    "load_graph",
    "save_remap_table",
    "detemporalize",
    "temporal_neighbors",
    "make_negative_sampler",
    "oriented_stream",
    "edge_batches",
]


class GraphFormatError(ValueError):
    """Raised when an edge-list file or edge array violates the expected format."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class TemporalGraph:
    """Immutable undirected temporal multigraph.

    Parameters
    ----------
    edges : ndarray of shape (m, 3), int64
        Rows ``(u, v, t)`` with contiguous node ids in ``[0, node_count)`` and
        non-negative integer timestamps.  Rows are re-sorted by
        ``(t, u, v)`` ascending on construction.
    node_count : int, optional
        Number of nodes; defaults to ``max id + 1`` (0 for an empty graph).
        Nodes beyond the largest endpoint are allowed (isolated nodes).
    original_ids : ndarray, optional
        ``original_ids[new_id]`` is the id the node carried in the source
        file; defaults to the identity mapping.  Kept for reporting only.
    """

    def __init__(
        self,
        edges: np.ndarray,
        node_count: int | None = None,
        original_ids: np.ndarray | None = None,
    ):
        edges = np.asarray(edges, dtype=np.int64)
        if edges.size == 0:
            edges = edges.reshape(0, 3)
        if edges.ndim != 2 or edges.shape[1] != 3:
            raise GraphFormatError(f"edges must have shape (m, 3), got {edges.shape}")
        m = edges.shape[0]
        if m:
            if edges[:, :2].min() < 0:
                raise GraphFormatError("negative node id")
            if edges[:, 2].min() < 0:
                raise GraphFormatError("negative timestamp")
            loops = np.flatnonzero(edges[:, 0] == edges[:, 1])
            if loops.size:
                u = int(edges[loops[0], 0])
                raise GraphFormatError(f"self-loop on node {u} (row {int(loops[0])})")
        inferred = int(edges[:, :2].max()) + 1 if m else 0
        n = inferred if node_count is None else int(node_count)
        if n < inferred:
            raise GraphFormatError(
                f"node_count={n} but edges reference node {inferred - 1}"
            )
        order = np.lexsort((edges[:, 1], edges[:, 0], edges[:, 2]))
        self.edges = _freeze(edges[order])
        self.node_count = n
        self.t_max = int(self.edges[-1, 2]) if m else 0
        if original_ids is None:
            original_ids = np.arange(n, dtype=np.int64)
        original_ids = np.asarray(original_ids, dtype=np.int64)
        if original_ids.shape != (n,):
            raise GraphFormatError("original_ids must have one entry per node")
        self.original_ids = _freeze(original_ids)

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    def to_internal(self, original: np.ndarray | list[int]) -> np.ndarray:
        """Map original node ids back to contiguous internal ids."""
        original = np.asarray(original, dtype=np.int64)
        idx = np.searchsorted(self.original_ids, original)
        ok = (idx < self.node_count) & (
            self.original_ids[np.minimum(idx, self.node_count - 1)] == original
        )
        if not np.all(ok):
            missing = original[~ok]
            raise KeyError(f"unknown node id(s): {missing[:5].tolist()}")
        return idx

    @cached_property
    def _history(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Per-node incident events sorted by (t, other): CSR (ptr, nbr, t)."""
        m = self.edge_count
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        oth = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        ts = np.concatenate([self.edges[:, 2], self.edges[:, 2]])
        order = np.lexsort((oth, ts, src))
        src, oth, ts = src[order], oth[order], ts[order]
        ptr = np.zeros(self.node_count + 1, dtype=np.int64)
        counts = np.bincount(src, minlength=self.node_count) if m else np.zeros(
            self.node_count, dtype=np.int64
        )
        ptr[1:] = np.cumsum(counts)
        return _freeze(ptr), _freeze(oth), _freeze(ts)

    def __repr__(self) -> str:
        return (
            f"TemporalGraph(n={self.node_count}, m={self.edge_count}, "
            f"t_max={self.t_max})"
        )


class DeTemporalGraph:
    """Static simple graph obtained by ignoring timestamps (CSR adjacency)."""

    def __init__(self, node_count: int, pairs: np.ndarray):
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        if pairs.size and pairs.min() < 0:
            raise GraphFormatError("negative node id")
        if pairs.size and pairs.max() >= node_count:
            raise GraphFormatError("pair endpoint out of range")
        if pairs.size and np.any(pairs[:, 0] == pairs[:, 1]):
            raise GraphFormatError("self-loop in pair list")
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        uniq = np.unique(np.stack([lo, hi], axis=1), axis=0) if pairs.size else pairs
        self.node_count = int(node_count)
        self.edge_count = int(uniq.shape[0])
        self.pairs = _freeze(uniq)
        src = np.concatenate([uniq[:, 0], uniq[:, 1]])
        dst = np.concatenate([uniq[:, 1], uniq[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        ptr = np.zeros(node_count + 1, dtype=np.int64)
        counts = np.bincount(src, minlength=node_count) if uniq.size else np.zeros(
            node_count, dtype=np.int64
        )
        ptr[1:] = np.cumsum(counts)
        self.indptr = _freeze(ptr)
        self.indices = _freeze(dst)

    def neighbors(self, v: int) -> np.ndarray:
        """Sorted neighbor ids of ``v``."""
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    @cached_property
    def degrees(self) -> np.ndarray:
        return _freeze(np.diff(self.indptr))

    def has_edge(self, u: int, v: int) -> bool:
        nbr = self.neighbors(u)
        i = np.searchsorted(nbr, v)
        return bool(i < nbr.size and nbr[i] == v)

    def __repr__(self) -> str:
        return f"DeTemporalGraph(n={self.node_count}, m={self.edge_count})"


@dataclass(frozen=True)
class EdgeBatch:
    """One chronological chunk of the oriented edge stream."""

    events: np.ndarray  # (k, 3) rows (source, target, t), non-decreasing t
    index: int

    def __len__(self) -> int:
        return int(self.events.shape[0])


class NegativeSampler:
    """Draws nodes with probability proportional to ``degree ** 0.75``.

    Draws are serialized per instance; concurrent callers need independently
    seeded instances.
    """

    def __init__(self, degrees: np.ndarray, seed: int):
        degrees = np.asarray(degrees, dtype=np.float64)
        weights = degrees**0.75
        total = weights.sum()
        if total <= 0:
            raise ValueError("cannot sample negatives: every node is isolated")
        self.probabilities = _freeze(weights / total)
        self._cum = _freeze(np.cumsum(weights))
        self._total = float(self._cum[-1])
        self.seed = int(seed)
        self._rng = np.random.default_rng(seed)

    def draw(self, size: int | tuple[int, ...]) -> np.ndarray:
        """Sample node ids with replacement; deterministic per seed."""
        r = self._rng.random(size) * self._total
        return np.searchsorted(self._cum, r, side="right").astype(np.int64)

    def spawn(self, salt: int | tuple[int, ...]) -> "NegativeSampler":
        """Independent sampler over the same weights, seeded from (seed, salt)."""
        salt_t = (salt,) if isinstance(salt, int) else tuple(salt)
        child = object.__new__(NegativeSampler)
        child.probabilities = self.probabilities
        child._cum = self._cum
        child._total = self._total
        child.seed = self.seed
        child._rng = np.random.default_rng((self.seed, *salt_t))
        return child


def _open_maybe_gzip(path: Path) -> IO[bytes]:
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_temporal_graph(path: str | Path) -> TemporalGraph:
    """Load a temporal graph from a whitespace-separated ``u v t`` edge list.

    Lines starting with ``#`` and blank lines are skipped; ``.gz`` files are
    decompressed transparently.  Node ids may be arbitrary integers and are
    remapped to contiguous ids in ascending original order; the mapping is
    kept on the returned graph.

    Raises
    ------
    GraphFormatError
        On malformed lines (with the 1-based line number), self-loops, or
        negative timestamps.
    FileNotFoundError
        If ``path`` does not exist.
    """
    path = Path(path)
    rows: list[tuple[int, int, int]] = []
    with _open_maybe_gzip(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.decode("utf-8").strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise GraphFormatError(
                    f"{path}:{lineno}: expected 'u v t', got {line!r}"
                )
            try:
                u, v, t = (int(p) for p in parts)
            except ValueError as exc:
                raise GraphFormatError(f"{path}:{lineno}: {exc}") from exc
            if u == v:
                raise GraphFormatError(f"{path}:{lineno}: self-loop on node {u}")
            if t < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative timestamp {t}")
            rows.append((u, v, t))
    if not rows:
        return TemporalGraph(np.empty((0, 3), dtype=np.int64), node_count=0)
    raw_edges = np.asarray(rows, dtype=np.int64)
    ids = np.unique(raw_edges[:, :2])
    remapped = raw_edges.copy()
    remapped[:, 0] = np.searchsorted(ids, raw_edges[:, 0])
    remapped[:, 1] = np.searchsorted(ids, raw_edges[:, 1])
    return TemporalGraph(remapped, node_count=ids.size, original_ids=ids)


def save_graph(g: TemporalGraph, path: str | Path) -> None:
    """Persist a temporal graph as a canonical binary (npz) artifact."""
    np.savez(
        path,
        edges=g.edges,
        node_count=np.int64(g.node_count),
        original_ids=g.original_ids,
    )


def load_graph(path: str | Path) -> TemporalGraph:
    """Load a graph written by :func:`save_graph`."""
    with np.load(path) as data:
        return TemporalGraph(
            data["edges"],
            node_count=int(data["node_count"]),
            original_ids=data["original_ids"],
        )


def save_remap_table(g: TemporalGraph, path: str | Path) -> None:
    """Two-column text: internal node id, original node id."""
    with open(path, "w") as fh:
        for new, orig in enumerate(g.original_ids):
            fh.write(f"{new} {int(orig)}\n")


def detemporalize(g: TemporalGraph) -> DeTemporalGraph:
    """Collapse a temporal graph to its static view, one edge per node pair."""
    return DeTemporalGraph(g.node_count, g.edges[:, :2])


def temporal_neighbors(
    g: TemporalGraph, u: int, t: int, h: int
) -> list[tuple[int, int]]:
    """Return the ``h`` most recent interaction events of ``u`` before ``t``.

    Events are ``(neighbor, timestamp)`` pairs with ``timestamp < t``
    (strict), newest first.  A neighbor appears once per interaction, so ids
    may repeat.  Fewer than ``h`` pairs are returned when the history is
    shorter.
    """
    if not 0 <= u < g.node_count:
        raise KeyError(f"node {u} out of range")
    if h < 1:
        raise ValueError("h must be >= 1")
    ptr, nbr, ts = g._history
    lo, hi = int(ptr[u]), int(ptr[u + 1])
    cut = lo + int(np.searchsorted(ts[lo:hi], t, side="left"))
    start = max(lo, cut - h)
    window = range(cut - 1, start - 1, -1)
    return [(int(nbr[i]), int(ts[i])) for i in window]


def make_negative_sampler(g: DeTemporalGraph, seed: int) -> NegativeSampler:
    """Build the degree-biased sampler over a de-temporal graph's nodes."""
    return NegativeSampler(g.degrees, seed)


def oriented_stream(g: TemporalGraph) -> np.ndarray:
    """Expand the sorted edge stream so each event appears in both orientations.

    Every undirected event ``(u, v, t)`` yields ``(u, v, t)`` and
    ``(v, u, t)`` back to back, so both endpoints act as the source once.
    """
    m = g.edge_count
    out = np.empty((2 * m, 3), dtype=np.int64)
    out[0::2] = g.edges
    out[1::2, 0] = g.edges[:, 1]
    out[1::2, 1] = g.edges[:, 0]
    out[1::2, 2] = g.edges[:, 2]
    return out


def edge_batches(g: TemporalGraph, batch_size: int) -> Iterator[EdgeBatch]:
    """Split the oriented edge stream into chronological chunks.

    Yields consecutive batches of ``batch_size`` oriented events (the last
    may be smaller); concatenating all batches reproduces the stream exactly.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    stream = oriented_stream(g)
    for i, start in enumerate(range(0, stream.shape[0], batch_size)):
        yield EdgeBatch(events=stream[start : start + batch_size], index=i)
