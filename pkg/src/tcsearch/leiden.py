"""Community detection on the de-temporal graph.

Three-phase partitioning (local moving, refinement, aggregation) iterated to
a fixed point under resolution-scaled modularity.  The implementation is
seed-deterministic, records modularity after every local-moving sweep, and
guarantees every returned subgraph is connected.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import DeTemporalGraph

__all__ = [
    "Partition",
    "leiden_partition",
    "modularity",
    "subgraph_of",
    "save_partition",
    "load_partition",
]

_GAIN_TOL = 1e-15


@dataclass(frozen=True)
class Partition:
    """Disjoint assignment of every node to exactly one subgraph.

    ``assignment[v]`` is the subgraph id of node ``v``; ids are contiguous in
    ``[0, subgraph_count)`` and every subgraph is non-empty.
    ``modularity_trace`` holds the objective after each local-moving sweep
    (diagnostic; empty for degenerate constructions).
    """

    assignment: np.ndarray
    subgraph_count: int
    members: tuple[np.ndarray, ...]
    modularity_trace: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1:
            raise ValueError("assignment must be a 1-d array")
        if a.size and (a.min() < 0 or a.max() >= self.subgraph_count):
            raise ValueError("subgraph id out of range")
        sizes = np.bincount(a, minlength=self.subgraph_count)
        if self.subgraph_count and sizes.min() == 0:
            raise ValueError("empty subgraph")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def node_count(self) -> int:
        return int(self.assignment.size)


def _partition_from_assignment(
    labels: np.ndarray, trace: tuple[float, ...] = ()
) -> Partition:
    """Renumber labels by first occurrence and build the members index."""
    labels = np.asarray(labels, dtype=np.int64)
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    remap = np.empty(int(labels.max()) + 1 if labels.size else 0, dtype=np.int64)
    remap[order] = np.arange(order.size)
    dense = remap[labels] if labels.size else labels
    members = tuple(
        np.flatnonzero(dense == c) for c in range(order.size)
    )
    return Partition(
        assignment=dense,
        subgraph_count=int(order.size),
        members=members,
        modularity_trace=trace,
    )


def modularity(g: DeTemporalGraph, p: Partition, resolution: float) -> float:
    """Resolution-scaled modularity of a partition of a simple graph.

    ``sum_c [ e_c / m - resolution * (d_c / (2 m))**2 ]`` with ``e_c`` the
    intra-subgraph edge count and ``d_c`` the total degree of subgraph ``c``.
    """
    if g.edge_count == 0:
        raise ValueError("modularity undefined on a graph with no edges")
    if p.assignment.size != g.node_count:
        raise ValueError("partition does not cover this graph")
    a = p.assignment
    m = g.edge_count
    intra = np.bincount(
        a[g.pairs[:, 0]],
        weights=(a[g.pairs[:, 0]] == a[g.pairs[:, 1]]).astype(np.float64),
        minlength=p.subgraph_count,
    )
    dc = np.bincount(a, weights=g.degrees.astype(np.float64), minlength=p.subgraph_count)
    return float(np.sum(intra / m - resolution * (dc / (2.0 * m)) ** 2))


def subgraph_of(p: Partition, v: int) -> int:
    """Id of the unique subgraph containing ``v``."""
    if not 0 <= v < p.assignment.size:
        raise KeyError(f"node {v} out of range")
    return int(p.assignment[v])


class _Level:
    """Weighted multigraph for one aggregation level.

    Edges are stored once with ``u <= v``; self-loop weight counts twice in a
    node's strength.  Total weight is invariant across levels.
    """

    def __init__(self, n: int, eu: np.ndarray, ev: np.ndarray, ew: np.ndarray):
        self.n = n
        self.eu, self.ev, self.ew = eu, ev, ew
        loops = eu == ev
        self.self_w = np.bincount(eu[loops], weights=ew[loops], minlength=n)
        pu, pv, pw = eu[~loops], ev[~loops], ew[~loops]
        src = np.concatenate([pu, pv])
        dst = np.concatenate([pv, pu])
        w = np.concatenate([pw, pw])
        order = np.lexsort((dst, src))
        self.arc_dst = dst[order]
        self.arc_w = w[order]
        ptr = np.zeros(n + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(np.bincount(src, minlength=n))
        self.arc_ptr = ptr
        self.strength = (
            np.bincount(src, weights=w, minlength=n) + 2.0 * self.self_w
        )
        self.total_weight = float(ew.sum())

    def arcs(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.arc_ptr[v], self.arc_ptr[v + 1]
        return self.arc_dst[lo:hi], self.arc_w[lo:hi]


def _level_modularity(lvl: _Level, comm: np.ndarray, gamma: float) -> float:
    W = lvl.total_weight
    intra = float(np.sum(lvl.ew[comm[lvl.eu] == comm[lvl.ev]]))
    dc = np.bincount(comm, weights=lvl.strength)
    return intra / W - gamma * float(np.sum((dc / (2.0 * W)) ** 2))


def _local_move(
    lvl: _Level,
    comm: np.ndarray,
    rng: np.random.Generator,
    gamma: float,
    trace: list[float],
) -> bool:
    """Sweep nodes in random order, greedily moving each to its best community.

    Modularity is recorded after every full sweep; each accepted move has
    strictly positive gain, so the recorded sequence is non-decreasing.
    Returns whether any node moved.
    """
    W = lvl.total_weight
    # densify labels so they live in [0, lvl.n) regardless of the level above
    _, dense = np.unique(comm, return_inverse=True)
    comm[:] = dense
    dc = np.bincount(comm, weights=lvl.strength, minlength=lvl.n)
    sizes = np.bincount(comm, minlength=lvl.n)
    free: list[int] = [c for c in range(lvl.n) if sizes[c] == 0]
    moved_any = False
    while True:
        moved = 0
        for v in rng.permutation(lvl.n):
            kv = lvl.strength[v]
            if kv == 0:
                continue
            cv = int(comm[v])
            nbr, w = lvl.arcs(v)
            ncomm = comm[nbr]
            cand = np.unique(ncomm)
            k_to = {int(c): float(w[ncomm == c].sum()) for c in cand}
            k_own = k_to.get(cv, 0.0)
            d_own = dc[cv]
            best_gain, best_c = 0.0, cv
            for c in sorted(k_to):  # ascending id: ties keep the smaller
                if c == cv:
                    continue
                gain = (k_to[c] - k_own) / W - gamma * kv * (
                    dc[c] - d_own + kv
                ) / (2.0 * W * W)
                if gain > best_gain + _GAIN_TOL:
                    best_gain, best_c = gain, c
            # leaving to an empty community can also pay off
            empty_gain = -k_own / W - gamma * kv * (kv - d_own) / (2.0 * W * W)
            use_empty = bool(free) and empty_gain > best_gain + _GAIN_TOL
            if use_empty:
                best_gain, best_c = empty_gain, free[0]
            if best_gain > _GAIN_TOL and best_c != cv:
                if use_empty:
                    free.pop(0)
                comm[v] = best_c
                dc[cv] -= kv
                dc[best_c] += kv
                sizes[cv] -= 1
                sizes[best_c] += 1
                if sizes[cv] == 0:
                    free.append(cv)
                    free.sort()
                moved += 1
        trace.append(_level_modularity(lvl, comm, gamma))
        if moved == 0:
            break
        moved_any = True
    return moved_any


def _refine(
    lvl: _Level,
    comm: np.ndarray,
    rng: np.random.Generator,
    gamma: float,
    theta: float = 1e-2,
) -> np.ndarray:
    """Split each community into merged singletons (randomized, gain-weighted).

    Starting from singletons inside each community, nodes still alone may
    merge into an adjacent sub-community of the same community; the target is
    drawn with probability proportional to ``exp(gain / theta)`` among
    non-negative-gain candidates.  Only adjacent merges occur, so every
    sub-community is connected.
    """
    W = lvl.total_weight
    sub = np.arange(lvl.n, dtype=np.int64)
    sub_d = lvl.strength.copy()
    sub_size = np.ones(lvl.n, dtype=np.int64)
    for v in rng.permutation(lvl.n):
        if sub_size[sub[v]] > 1:
            continue
        kv = lvl.strength[v]
        nbr, w = lvl.arcs(v)
        same = comm[nbr] == comm[v]
        if not np.any(same):
            continue
        nsub = sub[nbr[same]]
        nw = w[same]
        cand = np.unique(nsub)
        cand = cand[cand != sub[v]]
        if cand.size == 0:
            continue
        k_to = np.array([nw[nsub == s].sum() for s in cand])
        gains = k_to / W - gamma * kv * sub_d[cand] / (2.0 * W * W)
        ok = gains >= -_GAIN_TOL
        if not np.any(ok):
            continue
        cand, gains = cand[ok], gains[ok]
        logits = gains / theta
        p = np.exp(logits - logits.max())
        p /= p.sum()
        target = int(cand[rng.choice(cand.size, p=p)])
        sub_size[target] += sub_size[sub[v]]
        sub_size[sub[v]] = 0
        sub_d[target] += kv
        sub[v] = target
    return sub


def _aggregate(
    lvl: _Level, sub: np.ndarray, comm: np.ndarray
) -> tuple[_Level, np.ndarray, np.ndarray]:
    """Collapse refined sub-communities into the next level's nodes."""
    uniq, dense = np.unique(sub, return_inverse=True)
    su = dense[lvl.eu]
    sv = dense[lvl.ev]
    lo = np.minimum(su, sv)
    hi = np.maximum(su, sv)
    key = lo * uniq.size + hi
    ks, inv = np.unique(key, return_inverse=True)
    ws = np.bincount(inv, weights=lvl.ew)
    eu = (ks // uniq.size).astype(np.int64)
    ev = (ks % uniq.size).astype(np.int64)
    nxt = _Level(uniq.size, eu, ev, ws)
    # every member of a sub-community shares one community by construction
    agg_comm = comm[uniq]
    return nxt, dense, agg_comm


def _split_disconnected(g: DeTemporalGraph, labels: np.ndarray) -> np.ndarray:
    """Relabel so each label class is connected (BFS per class)."""
    out = np.full(g.node_count, -1, dtype=np.int64)
    nxt = 0
    for c in np.unique(labels):
        todo = set(np.flatnonzero(labels == c).tolist())
        while todo:
            seed_node = min(todo)
            stack = [seed_node]
            todo.discard(seed_node)
            out[seed_node] = nxt
            while stack:
                x = stack.pop()
                for y in g.neighbors(x):
                    y = int(y)
                    if y in todo:
                        todo.discard(y)
                        out[y] = nxt
                        stack.append(y)
            nxt += 1
    return out


def leiden_partition(
    g: DeTemporalGraph, resolution: float = 1.0, seed: int = 0
) -> Partition:
    """Partition a de-temporal graph by iterated local moving and refinement.

    Deterministic for a fixed seed.  Disconnected graphs are handled
    naturally (moves only target communities of neighbors, so subgraphs never
    span components).  Raises on an empty graph.
    """
    if g.node_count == 0:
        raise ValueError("cannot partition an empty graph")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if g.edge_count == 0:
        return _partition_from_assignment(np.arange(g.node_count, dtype=np.int64))

    rng = np.random.default_rng(seed)
    lvl = _Level(
        g.node_count,
        g.pairs[:, 0].astype(np.int64),
        g.pairs[:, 1].astype(np.int64),
        np.ones(g.edge_count, dtype=np.float64),
    )
    comm = np.arange(lvl.n, dtype=np.int64)
    membership = np.arange(g.node_count, dtype=np.int64)
    trace: list[float] = []
    for _ in range(256):  # safety bound; convergence happens far sooner
        moved = _local_move(lvl, comm, rng, resolution, trace)
        sub = _refine(lvl, comm, rng, resolution)
        no_split = np.unique(sub).size == np.unique(comm).size
        if not moved and no_split:
            break
        lvl, dense, comm = _aggregate(lvl, sub, comm)
        membership = dense[membership]
    labels = comm[membership]
    labels = _split_disconnected(g, labels)

    for a, b in zip(trace, trace[1:]):
        if b < a - 1e-12:
            raise RuntimeError(f"modularity decreased during a sweep: {a} -> {b}")
    return _partition_from_assignment(labels, trace=tuple(trace))


def save_partition(p: Partition, path: str | Path) -> None:
    """Write ``node subgraph`` lines (internal contiguous node ids)."""
    with open(path, "w") as fh:
        for v, c in enumerate(p.assignment):
            fh.write(f"{v} {int(c)}\n")


def load_partition(path: str | Path) -> Partition:
    """Read a partition written by :func:`save_partition`."""
    data = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if data.size == 0:
        raise ValueError(f"{path}: empty partition file")
    order = np.argsort(data[:, 0])
    data = data[order]
    if not np.array_equal(data[:, 0], np.arange(data.shape[0])):
        raise ValueError(f"{path}: node ids must be contiguous from 0")
    return _partition_from_assignment(data[:, 1])
