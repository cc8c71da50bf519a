from __future__ import annotations

import numpy as np
import pytest

from tcsearch.datasets import planted_temporal_graph
from tcsearch.graph import TemporalGraph


def random_temporal_graph(rng: np.random.Generator, n: int, m: int, t_max: int = 50):
    """Random multigraph without self-loops; may contain repeated pairs."""
    rows = []
    while len(rows) < m:
        u, v = rng.integers(0, n, size=2)
        if u == v:
            continue
        rows.append((int(u), int(v), int(rng.integers(0, t_max + 1))))
    return TemporalGraph(np.asarray(rows, dtype=np.int64), node_count=n)


@pytest.fixture(scope="session")
def small_planted():
    """Two planted temporal communities at desk scale (50 nodes)."""
    return planted_temporal_graph(
        [25, 25],
        intra_pair_prob=0.5,
        cross_pair_prob=0.02,
        intra_contacts=5.0,
        cross_contacts=2.0,
        t_max=500,
        seed=7,
    )
