from __future__ import annotations

import numpy as np
import pytest

from tcsearch.embedding import (
    EmbeddingTable,
    load_embeddings,
    random_table,
    save_embeddings,
)


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    table = EmbeddingTable(
        rng.normal(size=(17, 9)), rng.uniform(0.1, 2.0, size=17)
    )
    path = tmp_path / "emb.bin"
    save_embeddings(table, path)
    again = load_embeddings(path)
    assert np.array_equal(table.vectors, again.vectors)
    assert np.array_equal(table.decay, again.decay)


def test_rejects_non_positive_decay():
    with pytest.raises(ValueError):
        EmbeddingTable(np.zeros((2, 3)), np.array([1.0, 0.0]))


def test_rejects_non_finite_vectors():
    bad = np.zeros((2, 2))
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        EmbeddingTable(bad)


def test_rejects_wrong_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"definitely not an embedding file")
    with pytest.raises(ValueError, match="not an embedding"):
        load_embeddings(path)


def test_random_table_is_seeded_and_bounded():
    a = random_table(10, 16, seed=3)
    b = random_table(10, 16, seed=3)
    assert np.array_equal(a.vectors, b.vectors)
    assert np.all(np.abs(a.vectors) <= 0.5 / 16)
    assert np.all(a.decay == 1.0)


def test_copy_is_independent():
    a = random_table(4, 4, seed=0)
    b = a.copy()
    b.vectors[0, 0] = 99.0
    assert a.vectors[0, 0] != 99.0
