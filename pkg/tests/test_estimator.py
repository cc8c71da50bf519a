from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone

from tcsearch.datasets import planted_temporal_graph
from tcsearch.estimator import TemporalCommunitySearch

FAST = dict(
    embedding_dim=16,
    epochs=3,
    batch_size=128,
    init_epochs=2,
    walk_length=10,
    walks_per_node=4,
)


@pytest.fixture(scope="module")
def fitted_model():
    g, truth = planted_temporal_graph([10, 10], seed=0)
    # shift ids so the estimator has to handle a non-contiguous id space
    edges = g.edges.copy()
    edges[:, :2] = edges[:, :2] * 3 + 100
    model = TemporalCommunitySearch(random_state=1, **FAST).fit(edges)
    communities = [
        {v * 3 + 100 for v in comm} for comm in truth.communities
    ]
    return model, communities


def test_get_set_params_round_trip():
    model = TemporalCommunitySearch(epochs=7, temperature=0.25)
    params = model.get_params()
    assert params["epochs"] == 7
    assert params["temperature"] == 0.25
    cloned = clone(model)
    assert cloned.get_params() == params


def test_defaults_match_reference_configuration():
    p = TemporalCommunitySearch().get_params()
    assert p["embedding_dim"] == 128
    assert p["epochs"] == 200
    assert p["batch_size"] == 1024
    assert p["learning_rate"] == 0.01
    assert p["history_size"] == 3
    assert p["negatives"] == 3
    assert p["temperature"] == 0.5
    assert p["top_k"] == 2


def test_predict_before_fit_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        TemporalCommunitySearch().predict([[0]])


def test_fit_predict_original_id_space(fitted_model):
    model, communities = fitted_model
    some = sorted(communities[0])[:2]
    preds = model.predict([some])
    assert len(preds) == 1
    members = set(int(v) for v in preds[0])
    assert set(some) <= members
    # answers come back in the caller's id space
    assert all((v - 100) % 3 == 0 for v in members)


def test_predict_unknown_id_raises(fitted_model):
    model, _ = fitted_model
    with pytest.raises(KeyError):
        model.predict([[99999]])


def test_predict_rejects_bare_int(fitted_model):
    model, _ = fitted_model
    with pytest.raises(ValueError, match="collection"):
        model.predict([42])


def test_transform_shapes(fitted_model):
    model, communities = fitted_model
    all_z = model.transform()
    assert all_z.shape == (20, 16)
    some = sorted(communities[1])[:3]
    sub = model.transform(some)
    assert sub.shape == (3, 16)


def test_score_matches_f1_of_predictions(fitted_model):
    model, communities = fitted_model
    queries = [sorted(c)[:1] for c in communities]
    s = model.score(queries, communities)
    assert 0.0 <= s <= 1.0


def test_fit_rejects_empty():
    with pytest.raises(ValueError):
        TemporalCommunitySearch(**FAST).fit(np.empty((0, 3)))


def test_fit_accepts_graph_and_is_deterministic():
    g, _ = planted_temporal_graph([6, 6], seed=2)
    m1 = TemporalCommunitySearch(random_state=5, **FAST).fit(g)
    m2 = TemporalCommunitySearch(random_state=5, **FAST).fit(g)
    assert np.array_equal(m1.embeddings_.vectors, m2.embeddings_.vectors)
    p1 = m1.predict([[0, 1]])[0]
    p2 = m2.predict([[0, 1]])[0]
    assert np.array_equal(p1, p2)
