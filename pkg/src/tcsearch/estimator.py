"""Scikit-learn style front door for the whole system.

``fit`` consumes timestamped edges and pre-trains node embeddings;
``predict`` answers community queries; ``transform`` exposes the embeddings.
Hyperparameter defaults match the reference configuration.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .benchmark import fit_pipeline
from .config import PipelineConfig, Seeds
from .metrics import f1
from .search import Query, online_search
from .validation import as_query_list, as_temporal_graph

__all__ = ["TemporalCommunitySearch"]


class TemporalCommunitySearch(BaseEstimator):
    """Unsupervised temporal community search estimator.

    Parameters mirror the pipeline configuration; see the package README for
    the full glossary.  ``random_state`` seeds every stage deterministically.

    Examples
    --------
    >>> model = TemporalCommunitySearch(epochs=5, embedding_dim=32)
    >>> model.fit(edges)                    # (m, 3) rows of (u, v, t)
    >>> model.predict([[42], [7, 9]])       # -> [array of members, ...]
    """

    def __init__(
        self,
        embedding_dim: int = 128,
        epochs: int = 200,
        batch_size: int = 1024,
        learning_rate: float = 0.01,
        history_size: int = 3,
        negatives: int = 3,
        temperature: float = 0.5,
        top_k: int = 2,
        resolution: float = 1.0,
        walk_p: float = 1.0,
        walk_q: float = 1.0,
        walk_length: int = 20,
        walks_per_node: int = 10,
        window: int = 5,
        init_negatives: int = 5,
        init_epochs: int = 5,
        init_learning_rate: float = 0.025,
        weight_temporal: float = 1.0,
        weight_alignment: float = 1.0,
        weight_refinement: float = 1.0,
        random_state: int = 0,
    ):
        self.embedding_dim = embedding_dim
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.history_size = history_size
        self.negatives = negatives
        self.temperature = temperature
        self.top_k = top_k
        self.resolution = resolution
        self.walk_p = walk_p
        self.walk_q = walk_q
        self.walk_length = walk_length
        self.walks_per_node = walks_per_node
        self.window = window
        self.init_negatives = init_negatives
        self.init_epochs = init_epochs
        self.init_learning_rate = init_learning_rate
        self.weight_temporal = weight_temporal
        self.weight_alignment = weight_alignment
        self.weight_refinement = weight_refinement
        self.random_state = random_state

    def _config(self) -> PipelineConfig:
        base = self.random_state * 10
        return PipelineConfig(
            embedding_dim=self.embedding_dim,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            history_size=self.history_size,
            negatives=self.negatives,
            temperature=self.temperature,
            top_k=self.top_k,
            resolution=self.resolution,
            walk_p=self.walk_p,
            walk_q=self.walk_q,
            walk_length=self.walk_length,
            walks_per_node=self.walks_per_node,
            window=self.window,
            init_negatives=self.init_negatives,
            init_epochs=self.init_epochs,
            init_learning_rate=self.init_learning_rate,
            weight_temporal=self.weight_temporal,
            weight_alignment=self.weight_alignment,
            weight_refinement=self.weight_refinement,
            seeds=Seeds(
                leiden=base + 1, init=base + 2, train=base + 3, eval=base + 4
            ),
        )

    def fit(self, X, y=None):
        """Pre-train embeddings on timestamped edges.

        ``X`` may be an (m, 3) array of (u, v, t) rows with arbitrary integer
        node ids, a path to an edge-list file, or a TemporalGraph.
        """
        graph = as_temporal_graph(X)
        if graph.node_count == 0:
            raise ValueError("cannot fit on an empty graph")
        fitted = fit_pipeline(graph, self._config(), run=0)
        self.graph_ = fitted.graph
        self.detemporal_ = fitted.detemporal
        self.partition_ = fitted.partition
        self.embeddings_ = fitted.table
        self.centroids_ = fitted.centroids
        self.n_nodes_ = graph.node_count
        return self

    def predict(self, X) -> list[np.ndarray]:
        """Community members (original node ids) for each query in ``X``."""
        check_is_fitted(self, "embeddings_")
        out = []
        for q in as_query_list(X):
            internal = self.graph_.to_internal(np.asarray(q, dtype=np.int64))
            res = online_search(
                Query(internal.tolist()),
                self.detemporal_,
                self.partition_,
                self.embeddings_,
                k=self.top_k,
                centroids=self.centroids_,
            )
            out.append(self.graph_.original_ids[np.array(res.members)])
        return out

    def transform(self, X=None) -> np.ndarray:
        """Embedding rows for the given original node ids (all nodes if None)."""
        check_is_fitted(self, "embeddings_")
        if X is None:
            return self.embeddings_.vectors.copy()
        internal = self.graph_.to_internal(np.asarray(list(X), dtype=np.int64))
        return self.embeddings_.vectors[internal].copy()

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X, y).transform()

    def score(self, X, y) -> float:
        """Mean F1 of predicted communities against reference member sets."""
        preds = self.predict(X)
        truths = [set(int(v) for v in t) for t in y]
        if len(preds) != len(truths):
            raise ValueError("X and y must have the same length")
        return float(np.mean([f1(set(p.tolist()), t) for p, t in zip(preds, truths)]))
