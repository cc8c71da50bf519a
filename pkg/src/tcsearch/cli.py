"""Command-line pipeline: ingest -> pretrain -> search / eval.

Each stage persists its artifacts under the output directory so later stages
(and re-runs) can pick them up:

    graph.npz        canonical binary temporal graph (+ id remap inside)
    remap.txt        internal id -> original id, two columns
    partition.txt    node id -> subgraph id, two columns
    stats.json       n, m, static edge count, t_max, subgraph count
    embeddings.bin   trained table (same format as checkpoints)
    loss_log.jsonl   one record per epoch
    results.jsonl    one record per query
    report.jsonl     per-run, per-query benchmark records

All ids in user-facing files (queries, communities, results) are original
ids; partition and embeddings use internal contiguous ids (see remap.txt).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from .benchmark import run_benchmark, thread_count
from .config import PipelineConfig, load_config
from .embedding import load_embeddings, save_embeddings
from .graph import (
    detemporalize,
    load_graph,
    load_temporal_graph,
    make_negative_sampler,
    save_graph,
    save_remap_table,
)
from .leiden import leiden_partition, load_partition, save_partition
from .metrics import GroundTruth, load_ground_truth
from .node2vec import generate_walks, train_init
from .pretrain import compute_centroids, pretrain
from .search import Query, online_search

__all__ = ["main"]


def _load_cfg(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    for name in ("edges", "communities", "epochs", "runs"):
        val = getattr(args, name, None)
        if val is not None:
            overrides[name] = val
    if getattr(args, "k", None) is not None:
        overrides["top_k"] = args.k
    if getattr(args, "seed", None) is not None:
        s = args.seed
        overrides["seeds"] = dataclasses.replace(
            cfg.seeds, leiden=s + 1, init=s + 2, train=s + 3, eval=s + 4
        )
    return cfg.replace(**overrides) if overrides else cfg


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    cfg = _load_cfg(args)
    if not cfg.edges:
        print("ingest: no edge file given (--edges or config)", file=sys.stderr)
        return 2
    out = _out_dir(cfg)
    g = load_temporal_graph(cfg.edges)
    det = detemporalize(g)
    partition = leiden_partition(det, resolution=cfg.resolution, seed=cfg.seeds.leiden)
    save_graph(g, out / "graph.npz")
    save_remap_table(g, out / "remap.txt")
    save_partition(partition, out / "partition.txt")
    stats = {
        "nodes": g.node_count,
        "temporal_edges": g.edge_count,
        "static_edges": det.edge_count,
        "t_max": g.t_max,
        "subgraphs": partition.subgraph_count,
    }
    (out / "stats.json").write_text(json.dumps(stats, indent=2) + "\n")
    print(
        f"n={g.node_count} m={g.edge_count} m_static={det.edge_count} "
        f"t_max={g.t_max} subgraphs={partition.subgraph_count}"
    )
    return 0


def _latest_checkpoint(ckpt_dir: Path) -> tuple[int, Path] | None:
    if not ckpt_dir.is_dir():
        return None
    best: tuple[int, Path] | None = None
    for f in ckpt_dir.glob("epoch_*.bin"):
        try:
            e = int(f.stem.split("_")[1])
        except (IndexError, ValueError):
            continue
        if best is None or e > best[0]:
            best = (e, f)
    return best


def cmd_pretrain(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    graph_path = out / "graph.npz"
    if not graph_path.exists():
        print(f"pretrain: missing {graph_path}; run ingest first", file=sys.stderr)
        return 2
    g = load_graph(graph_path)
    partition = load_partition(out / "partition.txt")
    if partition.node_count != g.node_count:
        print("pretrain: partition does not match the ingested graph", file=sys.stderr)
        return 2
    det = detemporalize(g)

    start_epoch = 0
    log_path = out / "loss_log.jsonl"
    ckpt_dir = out / "checkpoints"
    if args.resume:
        latest = _latest_checkpoint(ckpt_dir)
        if latest is None:
            print("pretrain: --resume but no checkpoint found", file=sys.stderr)
            return 2
        start_epoch, ckpt = latest
        init = load_embeddings(ckpt)
        if init.dim != cfg.embedding_dim:
            print("pretrain: checkpoint dimension mismatch", file=sys.stderr)
            return 2
        kept = []
        if log_path.exists():
            for line in log_path.read_text().splitlines():
                if line and json.loads(line)["epoch"] < start_epoch:
                    kept.append(line)
        log_path.write_text("".join(k + "\n" for k in kept))
    else:
        corpus = generate_walks(
            det,
            p=cfg.walk_p,
            q=cfg.walk_q,
            walk_length=cfg.walk_length,
            walks_per_node=cfg.walks_per_node,
            seed=cfg.seeds.init,
        )
        sampler = make_negative_sampler(det, cfg.seeds.init)
        init = train_init(
            corpus,
            sampler,
            dim=cfg.embedding_dim,
            window=cfg.window,
            negatives=cfg.init_negatives,
            epochs=cfg.init_epochs,
            learning_rate=cfg.init_learning_rate,
            seed=cfg.seeds.init,
        )
        log_path.write_text("")

    tc = cfg.train_config()
    log_fh = open(log_path, "a")

    def on_epoch(stats, table):
        rec = {
            "epoch": stats.epoch,
            "loss_temporal": stats.loss_temporal,
            "loss_alignment": stats.loss_alignment,
            "loss_refinement": stats.loss_refinement,
            "seconds": stats.seconds,
        }
        log_fh.write(json.dumps(rec) + "\n")
        log_fh.flush()
        done = stats.epoch + 1
        if cfg.checkpoint_every > 0 and done % cfg.checkpoint_every == 0:
            ckpt_dir.mkdir(exist_ok=True)
            save_embeddings(table, ckpt_dir / f"epoch_{done:04d}.bin")

    try:
        table, _ = pretrain(
            g, partition, init, tc,
            start_epoch=start_epoch, detemporal=det, on_epoch=on_epoch,
        )
    finally:
        log_fh.close()
    save_embeddings(table, out / "embeddings.bin")
    print(f"trained {tc.epochs - start_epoch} epoch(s); wrote {out / 'embeddings.bin'}")
    return 0


def _read_queries(path: str | Path) -> list[list[int]]:
    """One query per line: comma-separated original node ids."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            out.append([int(tok) for tok in line.split(",") if tok.strip()])
    return out


def cmd_search(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    g = load_graph(out / "graph.npz")
    partition = load_partition(out / "partition.txt")
    table = load_embeddings(out / "embeddings.bin")
    if table.node_count != g.node_count:
        print("search: embedding table does not match the graph", file=sys.stderr)
        return 2
    det = detemporalize(g)
    centroids = compute_centroids(table, partition)
    queries = _read_queries(args.queries)
    results_path = out / "results.jsonl"
    wall_times = []
    with open(results_path, "w") as fh:
        for qid, original in enumerate(queries):
            try:
                internal = g.to_internal(np.asarray(original, dtype=np.int64))
                t0 = time.perf_counter()
                res = online_search(
                    Query(internal.tolist()), det, partition, table,
                    k=cfg.top_k, centroids=centroids,
                )
                wall_us = int((time.perf_counter() - t0) * 1e6)
            except (KeyError, ValueError) as exc:
                fh.write(json.dumps({"query": original, "error": str(exc)}) + "\n")
                continue
            wall_times.append(wall_us)
            members = g.original_ids[np.asarray(res.members)]
            fh.write(
                json.dumps(
                    {
                        "query": original,
                        "members": members.tolist(),
                        "candidate_size": res.candidate_size,
                        "trace_len": len(res.trace),
                        "wall_us": wall_us,
                    }
                )
                + "\n"
            )
    mean_ms = (sum(wall_times) / len(wall_times) / 1e3) if wall_times else float("nan")
    print(
        f"answered {len(wall_times)}/{len(queries)} queries; "
        f"mean online latency {mean_ms:.3f} ms; wrote {results_path}"
    )
    return 0


def _remap_ground_truth(g, gt: GroundTruth) -> GroundTruth:
    remapped = []
    for comm in gt.communities:
        internal = g.to_internal(np.asarray(sorted(comm), dtype=np.int64))
        remapped.append(frozenset(int(v) for v in internal))
    return GroundTruth(tuple(remapped))


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    out = _out_dir(cfg)
    graph_path = out / "graph.npz"
    if graph_path.exists():
        g = load_graph(graph_path)
    elif cfg.edges:
        g = load_temporal_graph(cfg.edges)
    else:
        print("eval: no ingested graph and no edge file configured", file=sys.stderr)
        return 2
    if not cfg.communities:
        print("eval: no ground-truth communities file given", file=sys.stderr)
        return 2
    gt = _remap_ground_truth(g, load_ground_truth(cfg.communities))
    report = run_benchmark(g, gt, cfg)
    with open(out / "report.jsonl", "w") as fh:
        for run in report.runs:
            for rec in run.records:
                fh.write(json.dumps({"run": run.run, **dataclasses.asdict(rec)}) + "\n")
    print(report.summary_table())
    fails = report.check_thresholds(cfg.thresholds)
    for msg in fails:
        print(f"THRESHOLD MISS {msg}", file=sys.stderr)
    return 1 if fails else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcsearch",
        description="Unsupervised temporal community search pipeline "
        f"(worker threads: {thread_count()}, set TCSEARCH_THREADS to change)",
    )
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="artifact directory (overrides config)")
    parser.add_argument("--seed", type=int, help="master seed (re-derives stage seeds)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load edges, partition, persist artifacts")
    p.add_argument("--edges", help="edge-list file: 'u v t' lines, # comments, .gz ok")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("pretrain", help="walk init + temporal pre-training")
    p.add_argument("--epochs", type=int, help="override training epochs")
    p.add_argument("--resume", action="store_true", help="continue from last checkpoint")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("search", help="answer a query file with the trained model")
    p.add_argument("--queries", required=True, help="one query per line, comma-separated ids")
    p.add_argument("--k", type=int, help="similar subgraphs per touched subgraph")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="benchmark: train + answer generated queries")
    p.add_argument("--communities", help="ground truth: one community per line")
    p.add_argument("--runs", type=int, help="number of independent runs")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
