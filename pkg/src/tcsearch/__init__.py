"""Unsupervised temporal community search.

Offline stage: node embeddings are pre-trained on chronological edge batches
under three joint objectives (self-exciting interaction intensity, soft
alignment to partition subgraphs, contrastive local refinement).  Online
stage: given query nodes, a candidate space is assembled from partition
subgraphs and greedily expanded by centered cosine score gain.

The :class:`TemporalCommunitySearch` estimator wraps the whole pipeline with
a scikit-learn style fit/predict interface; the ``tcsearch`` CLI exposes the
stage-by-stage pipeline with persisted artifacts.
"""

from .benchmark import (
    EvalReport,
    fit_pipeline,
    generate_queries,
    run_benchmark,
)
from .config import PipelineConfig, Seeds, load_config, save_config
from .datasets import planted_temporal_graph, two_clique_temporal_graph
from .embedding import EmbeddingTable, load_embeddings, save_embeddings
from .estimator import TemporalCommunitySearch
from .graph import (
    DeTemporalGraph,
    EdgeBatch,
    GraphFormatError,
    NegativeSampler,
    TemporalGraph,
    detemporalize,
    edge_batches,
    load_temporal_graph,
    make_negative_sampler,
    temporal_neighbors,
)
from .leiden import Partition, leiden_partition, modularity, subgraph_of
from .metrics import GroundTruth, f1, jaccard, load_ground_truth, nmi
from .node2vec import WalkCorpus, generate_walks, train_init
from .pretrain import (
    EpochStats,
    IntensityContext,
    TrainConfig,
    alignment_loss,
    batch_refinement_loss,
    compute_centroids,
    intensity,
    pretrain,
    soft_assignment,
    target_distribution,
    temporal_loss,
)
from .search import (
    CommunityResult,
    Query,
    candidate_space,
    community_scores,
    ecsg,
    online_search,
    topk_similar_subgraphs,
)

__version__ = "0.1.0"

__all__ = [
    "TemporalCommunitySearch",
    "TemporalGraph",
    "DeTemporalGraph",
    "EdgeBatch",
    "NegativeSampler",
    "GraphFormatError",
    "load_temporal_graph",
    "detemporalize",
    "temporal_neighbors",
    "make_negative_sampler",
    "edge_batches",
    "Partition",
    "leiden_partition",
    "modularity",
    "subgraph_of",
    "EmbeddingTable",
    "save_embeddings",
    "load_embeddings",
    "WalkCorpus",
    "generate_walks",
    "train_init",
    "IntensityContext",
    "TrainConfig",
    "EpochStats",
    "intensity",
    "temporal_loss",
    "compute_centroids",
    "soft_assignment",
    "target_distribution",
    "alignment_loss",
    "batch_refinement_loss",
    "pretrain",
    "Query",
    "CommunityResult",
    "topk_similar_subgraphs",
    "candidate_space",
    "community_scores",
    "ecsg",
    "online_search",
    "GroundTruth",
    "f1",
    "jaccard",
    "nmi",
    "load_ground_truth",
    "generate_queries",
    "run_benchmark",
    "fit_pipeline",
    "EvalReport",
    "PipelineConfig",
    "Seeds",
    "load_config",
    "save_config",
    "planted_temporal_graph",
    "two_clique_temporal_graph",
]
