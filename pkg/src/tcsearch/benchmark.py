"""Query-workload generation and benchmark orchestration.

A benchmark run trains the full pipeline from scratch with run-specific
seeds, answers a fixed query workload, and scores every answer against the
community its query was drawn from.  Aggregates are means and standard
deviations of the per-run means.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .embedding import EmbeddingTable
from .graph import DeTemporalGraph, TemporalGraph, detemporalize, make_negative_sampler
from .leiden import Partition, leiden_partition
from .metrics import GroundTruth, f1, jaccard, nmi
from .node2vec import generate_walks, train_init
from .pretrain import compute_centroids, pretrain
from .search import Query, online_search

__all__ = [
    "QueryRecord",
    "RunReport",
    "EvalReport",
    "generate_queries",
    "evaluate_queries",
    "fit_pipeline",
    "run_benchmark",
    "thread_count",
]

_METRICS = ("f1", "jaccard", "nmi")


def thread_count() -> int:
    """Worker threads for query evaluation (TCSEARCH_THREADS, default 1)."""
    try:
        return max(1, int(os.environ.get("TCSEARCH_THREADS", "1")))
    except ValueError:
        return 1


def generate_queries(
    gt: GroundTruth,
    count: int,
    size_range: tuple[int, int] = (1, 3),
    seed: int = 0,
) -> list[tuple[Query, int]]:
    """Random queries, each sampled inside one ground-truth community.

    Picks a community uniformly, then a query size uniform in the range, then
    that many distinct members.  Communities too small for the drawn size are
    resampled (bounded retries).
    """
    a, b = size_range
    if count < 1:
        raise ValueError("count must be >= 1")
    if not 1 <= a <= b:
        raise ValueError("need 1 <= min size <= max size")
    rng = np.random.default_rng(seed)
    out: list[tuple[Query, int]] = []
    for _ in range(count):
        for _attempt in range(100):
            ci = int(rng.integers(gt.community_count))
            size = int(rng.integers(a, b + 1))
            members = sorted(gt.communities[ci])
            if len(members) >= size:
                picked = rng.choice(len(members), size=size, replace=False)
                out.append((Query(members[i] for i in picked), ci))
                break
        else:
            raise ValueError(
                f"no community can host a query of size >= {a} after retries"
            )
    return out


@dataclass(frozen=True)
class QueryRecord:
    query: tuple[int, ...]
    truth_index: int
    f1: float
    jaccard: float
    nmi: float
    seconds: float
    member_count: int
    candidate_size: int


@dataclass(frozen=True)
class RunReport:
    run: int
    records: tuple[QueryRecord, ...]

    def mean(self, metric: str) -> float:
        return float(np.mean([getattr(r, metric) for r in self.records]))


@dataclass(frozen=True)
class EvalReport:
    runs: tuple[RunReport, ...]

    def aggregate(self) -> dict[str, tuple[float, float]]:
        """Per-metric (mean, std) of the per-run means; std is 0 for one run."""
        out = {}
        for m in _METRICS + ("seconds",):
            vals = np.array([r.mean(m) for r in self.runs])
            out[m] = (float(vals.mean()), float(vals.std()))
        return out

    def summary_table(self) -> str:
        agg = self.aggregate()
        lines = [f"{'metric':<10}{'mean':>10}{'std':>10}"]
        for m in _METRICS:
            mean, std = agg[m]
            lines.append(f"{m:<10}{mean:>10.4f}{std:>10.4f}")
        mean_ms = agg["seconds"][0] * 1e3
        lines.append(f"{'latency':<10}{mean_ms:>8.2f}ms{'':>10}")
        return "\n".join(lines)

    def check_thresholds(self, thresholds: dict[str, float]) -> list[str]:
        """Return failure messages for every aggregate mean below its bound."""
        agg = self.aggregate()
        fails = []
        for name, bound in thresholds.items():
            if name not in agg:
                raise KeyError(f"unknown threshold metric {name!r}")
            if agg[name][0] < bound:
                fails.append(f"{name}: mean {agg[name][0]:.4f} < required {bound}")
        return fails


@dataclass(frozen=True)
class FittedPipeline:
    graph: TemporalGraph
    detemporal: DeTemporalGraph
    partition: Partition
    table: EmbeddingTable
    centroids: np.ndarray


def fit_pipeline(
    g: TemporalGraph,
    cfg: PipelineConfig,
    run: int = 0,
    partition: Partition | None = None,
) -> FittedPipeline:
    """Train everything: partition, walk init, then temporal pre-training."""
    seeds = cfg.seeds.for_run(run)
    det = detemporalize(g)
    if partition is None:
        partition = leiden_partition(det, resolution=cfg.resolution, seed=seeds.leiden)
    corpus = generate_walks(
        det,
        p=cfg.walk_p,
        q=cfg.walk_q,
        walk_length=cfg.walk_length,
        walks_per_node=cfg.walks_per_node,
        seed=seeds.init,
    )
    sampler = make_negative_sampler(det, seeds.init)
    init = train_init(
        corpus,
        sampler,
        dim=cfg.embedding_dim,
        window=cfg.window,
        negatives=cfg.init_negatives,
        epochs=cfg.init_epochs,
        learning_rate=cfg.init_learning_rate,
        seed=seeds.init,
    )
    table, _ = pretrain(
        g, partition, init, cfg.train_config(seed=seeds.train), detemporal=det
    )
    return FittedPipeline(
        graph=g,
        detemporal=det,
        partition=partition,
        table=table,
        centroids=compute_centroids(table, partition),
    )


def evaluate_queries(
    fitted: FittedPipeline,
    queries: list[tuple[Query, int]],
    gt: GroundTruth,
    top_k: int,
    run: int = 0,
) -> RunReport:
    """Answer every query and score it against its source community."""
    n = fitted.graph.node_count

    def _one(item: tuple[Query, int]) -> QueryRecord:
        q, ci = item
        t0 = time.perf_counter()
        res = online_search(
            q,
            fitted.detemporal,
            fitted.partition,
            fitted.table,
            k=top_k,
            centroids=fitted.centroids,
        )
        dt = time.perf_counter() - t0
        truth = gt.communities[ci]
        pred = res.member_set()
        return QueryRecord(
            query=q.nodes,
            truth_index=ci,
            f1=f1(pred, truth),
            jaccard=jaccard(pred, truth),
            nmi=nmi(pred, truth, n),
            seconds=dt,
            member_count=len(pred),
            candidate_size=res.candidate_size,
        )

    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = tuple(pool.map(_one, queries))
    else:
        records = tuple(_one(item) for item in queries)
    return RunReport(run=run, records=records)


def run_benchmark(
    g: TemporalGraph,
    gt: GroundTruth,
    cfg: PipelineConfig,
    runs: int | None = None,
) -> EvalReport:
    """Full pipeline x runs against one fixed query workload."""
    runs = cfg.runs if runs is None else runs
    if runs < 1:
        raise ValueError("runs must be >= 1")
    queries = generate_queries(
        gt,
        cfg.query_count,
        (cfg.query_size_min, cfg.query_size_max),
        seed=cfg.seeds.eval,
    )
    reports = []
    for run in range(runs):
        fitted = fit_pipeline(g, cfg, run=run)
        reports.append(evaluate_queries(fitted, queries, gt, cfg.top_k, run=run))
    return EvalReport(runs=tuple(reports))
