from __future__ import annotations

import gzip

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tcsearch.graph import (
    GraphFormatError,
    NegativeSampler,
    TemporalGraph,
    detemporalize,
    edge_batches,
    load_graph,
    load_temporal_graph,
    make_negative_sampler,
    oriented_stream,
    save_graph,
    temporal_neighbors,
)

from conftest import random_temporal_graph


# ---------------------------------------------------------------- loading


def test_load_sorts_by_timestamp(tmp_path):
    f = tmp_path / "edges.txt"
    f.write_text("0 1 5\n1 2 3\n")
    g = load_temporal_graph(f)
    assert g.edges.tolist() == [[1, 2, 3], [0, 1, 5]]
    assert g.t_max == 5
    assert g.node_count == 3


def test_load_empty_file(tmp_path):
    f = tmp_path / "edges.txt"
    f.write_text("# nothing here\n\n")
    g = load_temporal_graph(f)
    assert g.node_count == 0
    assert g.edge_count == 0
    assert g.t_max == 0


def test_load_remaps_sparse_ids(tmp_path):
    f = tmp_path / "edges.txt"
    f.write_text("100 7 1\n7 42 2\n")
    g = load_temporal_graph(f)
    assert g.node_count == 3
    assert g.original_ids.tolist() == [7, 42, 100]
    # 7 -> 0, 42 -> 1, 100 -> 2
    assert g.edges.tolist() == [[2, 0, 1], [0, 1, 2]]
    assert g.to_internal([100, 7]).tolist() == [2, 0]
    with pytest.raises(KeyError):
        g.to_internal([8])


def test_load_rejects_malformed_line(tmp_path):
    f = tmp_path / "edges.txt"
    f.write_text("0 1 5\noops\n")
    with pytest.raises(GraphFormatError, match=":2"):
        load_temporal_graph(f)


def test_load_rejects_self_loop(tmp_path):
    f = tmp_path / "edges.txt"
    f.write_text("3 3 1\n")
    with pytest.raises(GraphFormatError, match="self-loop"):
        load_temporal_graph(f)


def test_load_rejects_negative_timestamp(tmp_path):
    f = tmp_path / "edges.txt"
    f.write_text("0 1 -4\n")
    with pytest.raises(GraphFormatError, match="negative timestamp"):
        load_temporal_graph(f)


def test_load_gzip_transparent(tmp_path):
    f = tmp_path / "edges.txt.gz"
    with gzip.open(f, "wb") as fh:
        fh.write(b"0 1 5\n1 2 3\n")
    g = load_temporal_graph(f)
    assert g.edge_count == 2
    assert g.t_max == 5


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_temporal_graph(tmp_path / "nope.txt")


def test_graph_npz_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = random_temporal_graph(rng, 12, 40)
    save_graph(g, tmp_path / "g.npz")
    g2 = load_graph(tmp_path / "g.npz")
    assert np.array_equal(g.edges, g2.edges)
    assert np.array_equal(g.original_ids, g2.original_ids)


# ---------------------------------------------------------- detemporalize


def test_detemporalize_dedups_pairs():
    g = TemporalGraph(np.array([[0, 1, 1], [0, 1, 2], [1, 2, 3]]))
    det = detemporalize(g)
    assert det.edge_count == 2


def test_detemporalize_no_repeats_identity():
    g = TemporalGraph(np.array([[0, 1, 1], [1, 2, 2], [2, 3, 3]]))
    assert detemporalize(g).edge_count == g.edge_count


def test_detemporalize_symmetric_neighbors():
    g = TemporalGraph(np.array([[0, 1, 1], [2, 1, 5]]))
    det = detemporalize(g)
    assert det.neighbors(1).tolist() == [0, 2]
    assert det.neighbors(0).tolist() == [1]
    assert det.degrees.tolist() == [1, 2, 1]


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_duplicate_timestamp_never_changes_static_view(seed):
    rng = np.random.default_rng(seed)
    g = random_temporal_graph(rng, 8, 20)
    extra = g.edges[int(rng.integers(g.edge_count))].copy()
    extra[2] = int(rng.integers(0, 60))
    g2 = TemporalGraph(np.vstack([g.edges, extra]), node_count=g.node_count)
    d1, d2 = detemporalize(g), detemporalize(g2)
    assert np.array_equal(d1.pairs, d2.pairs)


# ------------------------------------------------------ temporal neighbors


def test_temporal_neighbors_basic():
    g = TemporalGraph(np.array([[0, 1, 1], [0, 2, 4], [0, 3, 6]]))
    assert temporal_neighbors(g, 0, 5, 3) == [(2, 4), (1, 1)]


def test_temporal_neighbors_strict_inequality():
    g = TemporalGraph(np.array([[0, 1, 1], [0, 2, 4], [0, 3, 6]]))
    # the t=4 event itself is excluded at t=4
    assert temporal_neighbors(g, 0, 4, 3) == [(1, 1)]


def test_temporal_neighbors_truncates():
    g = TemporalGraph(np.array([[0, 1, 1], [0, 2, 4], [0, 3, 6]]))
    assert temporal_neighbors(g, 0, 7, 1) == [(3, 6)]


def test_temporal_neighbors_empty_history():
    g = TemporalGraph(np.array([[0, 1, 5]]))
    assert temporal_neighbors(g, 0, 5, 3) == []
    assert temporal_neighbors(g, 0, 3, 2) == []


def test_temporal_neighbors_matches_brute_force():
    # oracle: filter all incident events with t_w < t, sort by t_w descending
    rng = np.random.default_rng(42)
    for _ in range(20):
        g = random_temporal_graph(rng, 6, int(rng.integers(1, 51)), t_max=20)
        h = g.edge_count  # no truncation
        for u in range(g.node_count):
            for t in range(0, 22):
                events = []
                for uu, vv, tt in g.edges.tolist():
                    if uu == u and tt < t:
                        events.append((vv, tt))
                    elif vv == u and tt < t:
                        events.append((uu, tt))
                events.sort(key=lambda e: (-e[1], -e[0]))
                got = temporal_neighbors(g, u, t, h)
                assert sorted(got) == sorted(events)
                assert [tw for _, tw in got] == sorted(
                    [tw for _, tw in events], reverse=True
                )


# --------------------------------------------------------------- sampler


def test_sampler_probabilities_closed_form():
    s = NegativeSampler(np.array([1.0, 16.0]), seed=0)
    assert s.probabilities == pytest.approx([1 / 9, 8 / 9])


def test_sampler_uniform_for_equal_degrees():
    s = NegativeSampler(np.array([3.0, 3.0, 3.0]), seed=0)
    assert s.probabilities == pytest.approx([1 / 3, 1 / 3, 1 / 3])


def test_sampler_monte_carlo_matches_closed_form():
    s = NegativeSampler(np.array([1.0, 16.0]), seed=1234)
    draws = s.draw(10**6)
    freq = float(np.mean(draws == 1))
    assert abs(freq - 8 / 9) < 0.005


def test_sampler_deterministic_per_seed():
    a = NegativeSampler(np.array([2.0, 5.0, 1.0]), seed=9).draw(100)
    b = NegativeSampler(np.array([2.0, 5.0, 1.0]), seed=9).draw(100)
    assert np.array_equal(a, b)


def test_sampler_rejects_all_isolated():
    g = TemporalGraph(np.empty((0, 3)), node_count=4)
    with pytest.raises(ValueError, match="isolated"):
        make_negative_sampler(detemporalize(g), seed=0)


def test_sampler_chi_square_goodness_of_fit():
    rng = np.random.default_rng(5)
    for _ in range(5):
        n = int(rng.integers(10, 101))
        g = random_temporal_graph(rng, n, 4 * n)
        det = detemporalize(g)
        s = make_negative_sampler(det, seed=int(rng.integers(1 << 30)))
        draws = s.draw(10**5)
        counts = np.bincount(draws, minlength=n)
        live = det.degrees > 0
        assert counts[~live].sum() == 0
        expected = s.probabilities[live] * 10**5
        _, p = stats.chisquare(counts[live], expected)
        assert p > 0.01


# ----------------------------------------------------------- edge batches


def test_edge_batches_chunking():
    rng = np.random.default_rng(3)
    g = random_temporal_graph(rng, 6, 5)
    sizes = [len(b) for b in edge_batches(g, 4)]
    assert sizes == [4, 4, 2]


def test_edge_batches_single_batch_when_large():
    rng = np.random.default_rng(3)
    g = random_temporal_graph(rng, 6, 5)
    batches = list(edge_batches(g, 2 * g.edge_count))
    assert len(batches) == 1
    assert len(batches[0]) == 10


def test_edge_batches_timestamps_never_reorder():
    rng = np.random.default_rng(8)
    g = random_temporal_graph(rng, 10, 60)
    batches = list(edge_batches(g, 7))
    for b in batches:
        assert np.all(np.diff(b.events[:, 2]) >= 0)
    for a, b in zip(batches, batches[1:]):
        assert a.events[-1, 2] <= b.events[0, 2]


def test_edge_batches_each_event_twice():
    g = TemporalGraph(np.array([[0, 1, 1], [1, 2, 2]]))
    stream = np.vstack([b.events for b in edge_batches(g, 3)])
    assert stream.tolist() == [
        [0, 1, 1],
        [1, 0, 1],
        [1, 2, 2],
        [2, 1, 2],
    ]


@given(st.integers(0, 2**31 - 1), st.integers(1, 13))
@settings(max_examples=25, deadline=None)
def test_edge_batches_concatenation_is_order_preserving(seed, bs):
    rng = np.random.default_rng(seed)
    g = random_temporal_graph(rng, 7, int(rng.integers(1, 30)))
    stream = oriented_stream(g)
    batches = list(edge_batches(g, bs))
    assert np.array_equal(np.vstack([b.events for b in batches]), stream)
    assert [b.index for b in batches] == list(range(len(batches)))


def test_edge_batches_rejects_bad_batch_size():
    g = TemporalGraph(np.array([[0, 1, 1]]))
    with pytest.raises(ValueError):
        list(edge_batches(g, 0))
