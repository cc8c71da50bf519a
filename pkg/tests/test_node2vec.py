from __future__ import annotations

import numpy as np
import pytest

from tcsearch.embedding import random_table
from tcsearch.graph import (
    DeTemporalGraph,
    NegativeSampler,
    TemporalGraph,
    detemporalize,
    make_negative_sampler,
)
from tcsearch.node2vec import generate_walks, sgns_pair_loss, train_init


def path_graph():
    return DeTemporalGraph(3, np.array([[0, 1], [1, 2]]))


def triangle():
    return DeTemporalGraph(3, np.array([[0, 1], [1, 2], [0, 2]]))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# ----------------------------------------------------------------- walks


def test_every_walk_step_is_an_edge(small_planted):
    g, _ = small_planted
    det = detemporalize(g)
    corpus = generate_walks(det, walk_length=10, walks_per_node=3, seed=0)
    assert len(corpus) == 3 * det.node_count
    for walk in corpus.walks:
        for a, b in zip(walk, walk[1:]):
            assert det.has_edge(int(a), int(b))


def test_walks_cover_every_start_node():
    det = path_graph()
    corpus = generate_walks(det, walk_length=5, walks_per_node=2, seed=1)
    starts = sorted(int(w[0]) for w in corpus.walks)
    assert starts == [0, 0, 1, 1, 2, 2]


def test_isolated_node_yields_length_one_walk():
    det = DeTemporalGraph(3, np.array([[0, 1]]))
    corpus = generate_walks(det, walk_length=6, walks_per_node=1, seed=0)
    lone = [w for w in corpus.walks if w[0] == 2]
    assert lone and lone[0].tolist() == [2]


def test_unbiased_walk_is_uniform_on_path():
    # from the middle of 0-1-2 with p=q=1 both neighbors are equally likely
    det = path_graph()
    corpus = generate_walks(det, p=1, q=1, walk_length=40, walks_per_node=50, seed=3)
    nxt = []
    for walk in corpus.walks:
        for prev, cur, new in zip(walk, walk[1:], walk[2:]):
            if cur == 1:
                nxt.append(int(new))
    frac = np.mean(np.asarray(nxt) == 0)
    assert abs(frac - 0.5) < 0.05


def test_return_bias_on_path():
    # p=0.25 makes the return step 4x more likely than the outward step
    det = path_graph()
    corpus = generate_walks(
        det, p=0.25, q=1.0, walk_length=40, walks_per_node=200, seed=5
    )
    back = fwd = 0
    for walk in corpus.walks:
        for prev, cur, new in zip(walk, walk[1:], walk[2:]):
            if cur == 1:
                if new == prev:
                    back += 1
                else:
                    fwd += 1
    ratio = back / fwd
    assert 3.4 < ratio < 4.6


def test_q_is_irrelevant_on_triangle():
    # every candidate is the previous node or its neighbor, so q never applies
    w1 = generate_walks(triangle(), q=1.0, walk_length=12, walks_per_node=4, seed=9)
    w2 = generate_walks(triangle(), q=1e9, walk_length=12, walks_per_node=4, seed=9)
    assert all(np.array_equal(a, b) for a, b in zip(w1.walks, w2.walks))


def test_walks_deterministic_per_seed():
    det = triangle()
    w1 = generate_walks(det, walk_length=8, walks_per_node=3, seed=4)
    w2 = generate_walks(det, walk_length=8, walks_per_node=3, seed=4)
    assert all(np.array_equal(a, b) for a, b in zip(w1.walks, w2.walks))


# ------------------------------------------------------------------ sgns


def test_sgns_gradients_match_finite_differences():
    rng = np.random.default_rng(12)
    d = 6
    checked = 0
    while checked < 120:
        center = rng.normal(size=d)
        context = rng.normal(size=d)
        negs = rng.normal(size=(3, d))
        _, dc, do, dn = sgns_pair_loss(center, context, negs)
        flat = np.concatenate([center, context, negs.ravel()])
        grads = np.concatenate([dc, do, dn.ravel()])
        i = int(rng.integers(flat.size))
        h = 1e-6
        up, down = flat.copy(), flat.copy()
        up[i] += h
        down[i] -= h

        def unpack(x):
            return x[:d], x[d : 2 * d], x[2 * d :].reshape(3, d)

        lu = sgns_pair_loss(*unpack(up))[0]
        ld = sgns_pair_loss(*unpack(down))[0]
        fd = (lu - ld) / (2 * h)
        denom = max(abs(fd), abs(grads[i]), 1e-8)
        assert abs(fd - grads[i]) / denom < 1e-4
        checked += 1


def test_sgns_loss_value_at_zero():
    z = np.zeros(4)
    loss, *_ = sgns_pair_loss(z, z, np.zeros((2, 4)))
    assert loss == pytest.approx(3 * np.log(2))


# ------------------------------------------------------------- train_init


def test_epochs_zero_returns_seeded_random_init():
    det = path_graph()
    corpus = generate_walks(det, walk_length=6, walks_per_node=2, seed=0)
    sampler = make_negative_sampler(det, 0)
    table = train_init(corpus, sampler, dim=8, epochs=0, seed=42)
    ref = random_table(3, 8, seed=42)
    assert np.array_equal(table.vectors, ref.vectors)
    assert np.all(table.decay == 1.0)


def test_single_edge_graph_converges():
    g = TemporalGraph(np.array([[0, 1, 1]]))
    det = detemporalize(g)
    corpus = generate_walks(det, walk_length=10, walks_per_node=10, seed=0)
    sampler = make_negative_sampler(det, 0)
    table = train_init(
        corpus, sampler, dim=16, window=3, negatives=3, epochs=60,
        learning_rate=0.05, seed=1,
    )
    dot = float(table.vectors[0] @ table.vectors[1])
    assert _sigmoid(dot) > 0.9


def test_two_cliques_separate():
    pairs = []
    for base in (0, 5):
        for a in range(5):
            for b in range(a + 1, 5):
                pairs.append((base + a, base + b))
    det = DeTemporalGraph(10, np.array(pairs))
    corpus = generate_walks(det, walk_length=15, walks_per_node=10, seed=2)
    sampler = make_negative_sampler(det, 2)
    table = train_init(corpus, sampler, dim=16, epochs=25, seed=2)
    Z = table.vectors / np.linalg.norm(table.vectors, axis=1, keepdims=True)
    sims = Z @ Z.T
    intra, inter = [], []
    for i in range(10):
        for j in range(i + 1, 10):
            (intra if (i < 5) == (j < 5) else inter).append(sims[i, j])
    assert np.mean(intra) > np.mean(inter)


def test_train_init_deterministic():
    det = triangle()
    corpus = generate_walks(det, walk_length=8, walks_per_node=4, seed=0)
    t1 = train_init(corpus, make_negative_sampler(det, 3), dim=8, epochs=3, seed=5)
    t2 = train_init(corpus, make_negative_sampler(det, 3), dim=8, epochs=3, seed=5)
    assert np.array_equal(t1.vectors, t2.vectors)


def test_train_init_rejects_empty_corpus():
    from tcsearch.node2vec import WalkCorpus

    empty = WalkCorpus(walks=(), node_count=0, walk_length=2, walks_per_node=1)
    with pytest.raises(ValueError):
        train_init(empty, NegativeSampler(np.array([1.0]), 0))
