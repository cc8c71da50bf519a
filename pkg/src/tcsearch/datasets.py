"""Dataset helpers: a planted-community temporal graph generator for tests
and demos, and converters for public contact-network distributions.

The generator plants disjoint communities, samples a static relationship
graph that is dense inside communities and sparse across them, then expands
every relationship into a burst of timestamped contacts, so both the static
structure and the interaction recency carry community signal.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

from .graph import TemporalGraph
from .metrics import GroundTruth

__all__ = [
    "planted_temporal_graph",
    "two_clique_temporal_graph",
    "convert_contact_data",
]


def planted_temporal_graph(
    community_sizes: Sequence[int],
    *,
    intra_pair_prob: float = 0.4,
    cross_pair_prob: float = 0.01,
    intra_contacts: float = 8.0,
    cross_contacts: float = 2.0,
    t_max: int = 2000,
    burst_scale: float = 0.02,
    seed: int = 0,
) -> tuple[TemporalGraph, GroundTruth]:
    """Sample a temporal graph with planted communities.

    Pairs inside a community become relationships with ``intra_pair_prob``
    and exchange about ``intra_contacts`` timestamped contacts clustered
    around a random burst center (Laplace spread ``burst_scale * t_max``);
    cross-community pairs are sparser and briefer.  Node ids are contiguous,
    community by community.

    Returns the graph and the planted communities as ground truth.
    """
    if not community_sizes or any(s < 2 for s in community_sizes):
        raise ValueError("need communities of size >= 2")
    rng = np.random.default_rng(seed)
    bounds = np.concatenate([[0], np.cumsum(community_sizes)])
    n = int(bounds[-1])
    comms = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(community_sizes))]

    def _contact_times(mean: float) -> np.ndarray:
        count = 1 + rng.poisson(max(mean - 1.0, 0.0))
        center = rng.uniform(0, t_max)
        times = center + rng.laplace(0.0, burst_scale * t_max, size=count)
        return np.clip(np.rint(times), 0, t_max).astype(np.int64)

    rows: list[tuple[int, int, int]] = []
    for members in comms:
        k = members.size
        iu, ju = np.triu_indices(k, 1)
        take = rng.random(iu.size) < intra_pair_prob
        for a, b in zip(members[iu[take]], members[ju[take]]):
            for t in _contact_times(intra_contacts):
                rows.append((int(a), int(b), int(t)))
    for ci in range(len(comms)):
        for cj in range(ci + 1, len(comms)):
            expected = comms[ci].size * comms[cj].size * cross_pair_prob
            for _ in range(rng.poisson(expected)):
                a = int(rng.choice(comms[ci]))
                b = int(rng.choice(comms[cj]))
                for t in _contact_times(cross_contacts):
                    rows.append((a, b, int(t)))
    edges = np.asarray(rows, dtype=np.int64).reshape(-1, 3)
    graph = TemporalGraph(edges, node_count=n)
    truth = GroundTruth(tuple(frozenset(c.tolist()) for c in comms))
    return graph, truth


def two_clique_temporal_graph(
    clique_size: int = 25, contacts: int = 4, t_max: int = 100, seed: int = 0
) -> tuple[TemporalGraph, GroundTruth]:
    """Two fully-connected communities with repeated timestamped contacts."""
    rng = np.random.default_rng(seed)
    rows = []
    for offset in (0, clique_size):
        for a in range(clique_size):
            for b in range(a + 1, clique_size):
                for t in rng.integers(0, t_max + 1, size=contacts):
                    rows.append((offset + a, offset + b, int(t)))
    edges = np.asarray(rows, dtype=np.int64)
    graph = TemporalGraph(edges, node_count=2 * clique_size)
    truth = GroundTruth(
        (
            frozenset(range(clique_size)),
            frozenset(range(clique_size, 2 * clique_size)),
        )
    )
    return graph, truth


def convert_contact_data(
    src: str | Path,
    edges_out: str | Path,
    communities_out: str | Path | None = None,
    *,
    time_column: int = 0,
    u_column: int = 1,
    v_column: int = 2,
    label_columns: tuple[int, int] | None = (3, 4),
    rank_timestamps: bool = True,
) -> None:
    """Convert a public contact file (``t i j [Ci Cj]`` lines) to edge-list form.

    Raw timestamps are replaced by their 1-based dense rank when
    ``rank_timestamps`` is set, so the largest timestamp equals the number of
    distinct timestamps.  When label columns are present, a node-label
    community file is derived as one community per distinct label.
    """
    src = Path(src)
    raw: list[tuple[int, int, int]] = []
    labels: dict[int, str] = {}
    with open(src) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            t = int(parts[time_column])
            u = int(parts[u_column])
            v = int(parts[v_column])
            raw.append((t, u, v))
            if label_columns is not None and len(parts) > max(label_columns):
                labels[u] = parts[label_columns[0]]
                labels[v] = parts[label_columns[1]]
    if not raw:
        raise ValueError(f"{src}: no contact records found")
    arr = np.asarray(raw, dtype=np.int64)
    times = arr[:, 0]
    if rank_timestamps:
        uniq = np.unique(times)
        times = np.searchsorted(uniq, times) + 1
    with open(edges_out, "w") as fh:
        for (u, v), t in zip(arr[:, 1:], times):
            fh.write(f"{u} {v} {int(t)}\n")
    if communities_out is not None and labels:
        groups: dict[str, list[int]] = {}
        for node, lab in labels.items():
            groups.setdefault(lab, []).append(node)
        with open(communities_out, "w") as fh:
            for lab in sorted(groups):
                fh.write(" ".join(str(v) for v in sorted(groups[lab])) + "\n")
