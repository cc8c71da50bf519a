"""Input validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .graph import GraphFormatError, TemporalGraph, load_temporal_graph

__all__ = ["as_edge_array", "as_temporal_graph", "as_query_list"]


def as_edge_array(X) -> np.ndarray:
    """Coerce to an (m, 3) int64 edge array of (u, v, t) rows."""
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"expected an (m, 3) edge array, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.number):
        raise ValueError("edge array must be numeric")
    out = arr.astype(np.int64)
    if np.issubdtype(arr.dtype, np.floating) and not np.array_equal(out, arr):
        raise ValueError("edge array entries must be integral")
    return out


def as_temporal_graph(X) -> TemporalGraph:
    """Accept a TemporalGraph, an edge-list path, or an (m, 3) array.

    Array node ids may be arbitrary integers; they are remapped to contiguous
    internal ids with the original ids retained for reporting.
    """
    if isinstance(X, TemporalGraph):
        return X
    if isinstance(X, (str, Path)):
        return load_temporal_graph(X)
    edges = as_edge_array(X)
    if edges.shape[0] == 0:
        return TemporalGraph(edges, node_count=0)
    if np.any(edges[:, 2] < 0):
        raise GraphFormatError("negative timestamp")
    ids = np.unique(edges[:, :2])
    if ids.size and ids[0] < 0:
        raise GraphFormatError("negative node id")
    remapped = edges.copy()
    remapped[:, 0] = np.searchsorted(ids, edges[:, 0])
    remapped[:, 1] = np.searchsorted(ids, edges[:, 1])
    return TemporalGraph(remapped, node_count=ids.size, original_ids=ids)


def as_query_list(X) -> list[list[int]]:
    """Coerce to a list of node-id lists (one entry per query)."""
    if not hasattr(X, "__iter__"):
        raise ValueError("queries must be an iterable of node-id collections")
    out = []
    for q in X:
        if isinstance(q, (int, np.integer)):
            raise ValueError(
                "each query must be a collection of node ids; wrap single "
                "nodes as [node]"
            )
        out.append([int(v) for v in q])
    return out
