"""Per-node embedding storage with bit-exact binary persistence.

The table pairs an ``n x d`` float64 vector matrix with one positive decay
scalar per node (the per-source rate used by the exponential time kernel
during training).  Files round-trip bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["EmbeddingTable", "random_table", "save_embeddings", "load_embeddings"]

_MAGIC = b"TCSEMB\x00\x01"
_VERSION = 1


class EmbeddingTable:
    """Dense node embeddings plus per-node decay rates.

    Vectors are float64 and mutable (training updates them in place); copy
    before sharing across concurrent writers.
    """

    def __init__(self, vectors: np.ndarray, decay: np.ndarray | None = None):
        vectors = np.ascontiguousarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise ValueError("vectors must be an (n, d) matrix")
        n = vectors.shape[0]
        if decay is None:
            decay = np.ones(n, dtype=np.float64)
        decay = np.ascontiguousarray(decay, dtype=np.float64)
        if decay.shape != (n,):
            raise ValueError("decay must have one entry per node")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("non-finite embedding entry")
        if not np.all(np.isfinite(decay)) or np.any(decay <= 0):
            raise ValueError("decay entries must be finite and strictly positive")
        self.vectors = vectors
        self.decay = decay

    @property
    def node_count(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.vectors.copy(), self.decay.copy())

    def allclose(self, other: "EmbeddingTable", atol: float = 0.0) -> bool:
        if atol == 0.0:
            return np.array_equal(self.vectors, other.vectors) and np.array_equal(
                self.decay, other.decay
            )
        return np.allclose(self.vectors, other.vectors, atol=atol) and np.allclose(
            self.decay, other.decay, atol=atol
        )

    def __repr__(self) -> str:
        return f"EmbeddingTable(n={self.node_count}, d={self.dim})"


def random_table(n: int, d: int, seed: int) -> EmbeddingTable:
    """Seeded uniform init in ``[-0.5/d, 0.5/d]`` per coordinate, decay 1."""
    if d <= 0:
        raise ValueError("embedding dimension must be positive")
    rng = np.random.default_rng(seed)
    vectors = (rng.random((n, d)) - 0.5) / d
    return EmbeddingTable(vectors)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write magic/version/n/d header, row-major vectors, then decay floats."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQQ", _VERSION, table.node_count, table.dim))
        fh.write(table.vectors.astype("<f8", copy=False).tobytes(order="C"))
        fh.write(table.decay.astype("<f8", copy=False).tobytes())


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a file written by :func:`save_embeddings`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an embedding file")
        version, n, d = struct.unpack("<IQQ", fh.read(20))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        vec = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d)
        dec = np.frombuffer(fh.read(8 * n), dtype="<f8")
        if dec.size != n:
            raise ValueError(f"{path}: truncated file")
    return EmbeddingTable(vec.copy(), dec.copy())
