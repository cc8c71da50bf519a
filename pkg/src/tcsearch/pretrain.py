"""Offline pre-training of node embeddings from chronological edge batches.

Three objectives are summed per batch and descended jointly:

* a self-exciting intensity loss: each observed event raises the likelihood
  of the target under a base rate (negative squared embedding distance) plus
  attention-weighted, exponentially time-decayed influence of the source's
  recent interaction partners, against degree-sampled negative targets;
* an alignment loss pulling each node's live soft subgraph assignment
  (Student's-t kernel to subgraph centroids) toward a sharpened target
  distribution that is frozen once per epoch;
* a contrastive refinement loss on cosine similarities between the source
  and its recent partners plus the target, against sampled negatives.

All gradients are computed analytically (finite-difference checked in the
test suite); the optimizer is plain SGD with a global gradient-norm clip.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

try:  # fused event-loop kernels; the numpy path below is the fallback
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised where numba is absent
    _HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap

from .embedding import EmbeddingTable
from .graph import (
    DeTemporalGraph,
    EdgeBatch,
    NegativeSampler,
    TemporalGraph,
    detemporalize,
    make_negative_sampler,
    oriented_stream,
)
from .leiden import Partition

__all__ = [
    "IntensityContext",
    "SparseGrad",
    "TrainConfig",
    "EpochStats",
    "TrainingDiverged",
    "intensity",
    "temporal_loss",
    "compute_centroids",
    "soft_assignment",
    "target_distribution",
    "alignment_loss",
    "batch_refinement_loss",
    "pretrain",
]

_EPS = 1e-12
_REJECT_ROUNDS = 100


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss appears; carries epoch and batch index."""


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _softplus(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class IntensityContext:
    """One event seen from its source: who, whom, when, and recent history.

    ``history`` holds ``(neighbor, time)`` pairs, newest first, all strictly
    earlier than ``time``; times are normalized to [0, 1].
    """

    source: int
    target: int
    time: float
    history: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if any(tj >= self.time for _, tj in self.history):
            raise ValueError("history events must predate the context time")


def intensity(ctx: IntensityContext, table: EmbeddingTable) -> float:
    """Conditional intensity of the target joining the source's neighborhood.

    Base rate is the negative squared distance between source and target;
    each history partner contributes its own negative squared distance to the
    target, weighted by a softmax attention over (negative squared) distances
    to the source and an exponential decay ``exp(-decay_u * dt)``.
    """
    z = table.vectors
    zu, zv = z[ctx.source], z[ctx.target]
    lam = -float(np.sum((zu - zv) ** 2))
    if not ctx.history:
        return lam
    hid = np.array([h for h, _ in ctx.history], dtype=np.int64)
    ht = np.array([tj for _, tj in ctx.history])
    zh = z[hid]
    logits = -np.sum((zu - zh) ** 2, axis=1)
    alpha = np.exp(logits - logits.max())
    alpha /= alpha.sum()
    kappa = np.exp(-table.decay[ctx.source] * (ctx.time - ht))
    excite = -np.sum((zh - zv) ** 2, axis=1)
    return lam + float(np.sum(alpha * kappa * excite))


@dataclass
class SparseGrad:
    """Gradient restricted to the embedding rows a batch touched."""

    ids: np.ndarray  # (r,) unique node ids
    vectors: np.ndarray  # (r, d)
    decay: np.ndarray  # (r,)
    centroids: np.ndarray | None = None  # (K, d) when the loss touches them

    def scaled(self, w: float) -> "SparseGrad":
        return SparseGrad(
            self.ids,
            self.vectors * w,
            self.decay * w,
            None if self.centroids is None else self.centroids * w,
        )

    def coeff(self, node: int, coord: int) -> float:
        """Gradient of one embedding coordinate (0 if the row was untouched)."""
        pos = np.searchsorted(self.ids, node)
        if pos >= self.ids.size or self.ids[pos] != node:
            return 0.0
        return float(self.vectors[pos, coord])

    def decay_coeff(self, node: int) -> float:
        pos = np.searchsorted(self.ids, node)
        if pos >= self.ids.size or self.ids[pos] != node:
            return 0.0
        return float(self.decay[pos])


def _gather_sparse(
    rows: np.ndarray, vec_parts: np.ndarray, dec_rows: np.ndarray, dec_parts: np.ndarray
) -> SparseGrad:
    """Sum per-occurrence gradients into unique-row accumulators.

    Flattened bincount segment sum: a single sequential C pass, so the
    accumulation order is fixed and results stay bit-reproducible.
    """
    ids, inv = np.unique(rows, return_inverse=True)
    d = vec_parts.shape[-1]
    flat = (inv[:, None] * d + np.arange(d)).ravel()
    vectors = np.bincount(
        flat, weights=vec_parts.reshape(-1, d).ravel(), minlength=ids.size * d
    ).reshape(-1, d)
    decay = np.zeros(ids.size)
    if dec_rows.size:
        dpos = np.searchsorted(ids, dec_rows)
        decay = np.bincount(dpos, weights=dec_parts, minlength=ids.size)
    return SparseGrad(ids, vectors, decay)


# ---------------------------------------------------------------------------
# event contexts (shared by the intensity and refinement losses)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Contexts:
    """Padded per-event source/target/history arrays for one batch."""

    src: np.ndarray  # (E,)
    tgt: np.ndarray  # (E,)
    t: np.ndarray  # (E,) normalized
    hist_idx: np.ndarray  # (E, h) padded with 0
    hist_t: np.ndarray  # (E, h) normalized, padded with 0
    hist_mask: np.ndarray  # (E, h) bool


def build_contexts(
    graph: TemporalGraph, events: np.ndarray, history_size: int
) -> _Contexts:
    """Look up each event source's recent history (strictly earlier events)."""
    h = history_size
    ptr, nbr, ts = graph._history
    scale = float(graph.t_max) if graph.t_max > 0 else 1.0
    E = events.shape[0]
    hist_idx = np.zeros((E, h), dtype=np.int64)
    hist_t = np.zeros((E, h))
    hist_mask = np.zeros((E, h), dtype=bool)
    for e in range(E):
        u, t = int(events[e, 0]), int(events[e, 2])
        lo, hi = int(ptr[u]), int(ptr[u + 1])
        cut = lo + int(np.searchsorted(ts[lo:hi], t, side="left"))
        start = max(lo, cut - h)
        k = cut - start
        if k:
            sel = slice(cut - 1, start - 1 if start else None, -1)
            hist_idx[e, :k] = nbr[sel]
            hist_t[e, :k] = ts[sel] / scale
            hist_mask[e, :k] = True
    return _Contexts(
        src=events[:, 0].copy(),
        tgt=events[:, 1].copy(),
        t=events[:, 2] / scale,
        hist_idx=hist_idx,
        hist_t=hist_t,
        hist_mask=hist_mask,
    )


def _draw_negatives(
    sampler: NegativeSampler, src: np.ndarray, tgt: np.ndarray, count: int
) -> tuple[np.ndarray, np.ndarray]:
    """Negatives per event; collisions with the event's endpoints are redrawn
    and finally dropped (masked out) if the retry budget runs out."""
    negs = sampler.draw((src.size, count))
    bad = (negs == src[:, None]) | (negs == tgt[:, None])
    rounds = 0
    while np.any(bad) and rounds < _REJECT_ROUNDS:
        idx = np.nonzero(bad)
        negs[idx] = sampler.draw(idx[0].size)
        bad = (negs == src[:, None]) | (negs == tgt[:, None])
        rounds += 1
    return negs, ~bad


# ---------------------------------------------------------------------------
# temporal (self-exciting intensity) loss
# ---------------------------------------------------------------------------


def _intensity_batch(
    table: EmbeddingTable,
    ctx: _Contexts,
    targets: np.ndarray,  # (E, K) target ids; column 0 is the observed one
) -> tuple[np.ndarray, dict]:
    """Vectorized intensities for every (event, target) pair, plus the
    intermediates the backward pass needs.

    Squared distances are expanded as norms minus dot products so the whole
    forward/backward runs on batched matrix products instead of a
    materialized (E, h, K, d) difference tensor.
    """
    Z, dec = table.vectors, table.decay
    Zu = Z[ctx.src]  # (E, d)
    Zh = Z[ctx.hist_idx]  # (E, h, d)
    Zt = Z[targets]  # (E, K, d)
    un = np.einsum("ed,ed->e", Zu, Zu)
    hn = np.einsum("ehd,ehd->eh", Zh, Zh)
    tn = np.einsum("ekd,ekd->ek", Zt, Zt)
    logits = -(un[:, None] + hn - 2.0 * np.einsum("ed,ehd->eh", Zu, Zh))
    logits = np.where(ctx.hist_mask, logits, -np.inf)
    lmax = np.max(logits, axis=1, keepdims=True)
    expo = np.exp(logits - np.where(np.isfinite(lmax), lmax, 0.0))
    expo *= ctx.hist_mask
    denom = expo.sum(axis=1, keepdims=True)
    alpha = np.divide(expo, denom, out=np.zeros_like(expo), where=denom > 0)
    dt = ctx.t[:, None] - ctx.hist_t
    kappa = np.exp(-dec[ctx.src][:, None] * dt) * ctx.hist_mask
    w = alpha * kappa  # (E, h)
    mu = -(un[:, None] + tn - 2.0 * np.einsum("ed,ekd->ek", Zu, Zt))
    g = -(
        hn[:, :, None] + tn[:, None, :]
        - 2.0 * np.einsum("ehd,ekd->ehk", Zh, Zt)
    )  # (E, h, K)
    lam = mu + np.einsum("eh,ehk->ek", w, g)
    cache = dict(Zu=Zu, Zh=Zh, Zt=Zt, alpha=alpha, kappa=kappa, w=w, g=g, dt=dt)
    return lam, cache


def _intensity_backward(
    table: EmbeddingTable,
    ctx: _Contexts,
    targets: np.ndarray,
    G: np.ndarray,  # (E, K) d loss / d lambda
    cache: dict,
) -> SparseGrad:
    Zu, Zh, Zt = cache["Zu"], cache["Zh"], cache["Zt"]
    alpha, kappa, w, g, dt = (
        cache["alpha"], cache["kappa"], cache["w"], cache["g"], cache["dt"]
    )
    # base-rate path
    grad_u = -2.0 * (
        G.sum(axis=1)[:, None] * Zu - np.einsum("ek,ekd->ed", G, Zt)
    )
    grad_t = 2.0 * G[:, :, None] * (Zu[:, None, :] - Zt)
    # excitation path, holding the history weights fixed
    Gg = w[:, :, None] * G[:, None, :]  # (E, h, K)
    grad_h = -2.0 * (
        Gg.sum(axis=2)[:, :, None] * Zh - np.einsum("ehk,ekd->ehd", Gg, Zt)
    )
    grad_t += 2.0 * (
        np.einsum("ehk,ehd->ekd", Gg, Zh) - Gg.sum(axis=1)[:, :, None] * Zt
    )
    Gw = np.einsum("ek,ehk->eh", G, g)
    # decay path (kappa)
    g_dec = np.sum(Gw * alpha * kappa * (-dt), axis=1)
    # attention path (softmax backward)
    Gal = Gw * kappa
    dot = np.sum(Gal * alpha, axis=1, keepdims=True)
    Ga = alpha * (Gal - dot)
    grad_u += -2.0 * (
        Ga.sum(axis=1)[:, None] * Zu - np.einsum("eh,ehd->ed", Ga, Zh)
    )
    grad_h += 2.0 * Ga[:, :, None] * (Zu[:, None, :] - Zh)
    rows = np.concatenate([ctx.src, targets.ravel(), ctx.hist_idx.ravel()])
    d = grad_u.shape[1]
    parts = np.concatenate(
        [grad_u, grad_t.reshape(-1, d), grad_h.reshape(-1, d)]
    )
    return _gather_sparse(rows, parts, ctx.src, g_dec)


def _temporal_numpy(
    table: EmbeddingTable, ctx: _Contexts, targets: np.ndarray, keep: np.ndarray
) -> tuple[float, SparseGrad]:
    E = ctx.src.size
    lam, cache = _intensity_batch(table, ctx, targets)
    pos_term = _softplus(-lam[:, 0])
    neg_term = _softplus(lam[:, 1:]) * keep
    loss = float((pos_term.sum() + neg_term.sum()) / E)
    G = np.empty_like(lam)
    G[:, 0] = -_sigmoid(-lam[:, 0]) / E
    G[:, 1:] = _sigmoid(lam[:, 1:]) * keep / E
    return loss, _intensity_backward(table, ctx, targets, G, cache)


@_njit(cache=True)
def _k_temporal(Zc, decc, src, tgt, hidx, hlen, dt, keep, gradZ, gradD):
    """Fused per-event forward/backward for the intensity loss.

    Everything indexes the compact row set; gradients accumulate in place
    in a fixed order, so results are bit-reproducible.
    """
    E, K = tgt.shape
    h = hidx.shape[1]
    d = Zc.shape[1]
    total = 0.0
    a = np.empty(h)
    alpha = np.empty(h)
    kap = np.empty(h)
    w = np.empty(h)
    g = np.empty((h, K))
    lam = np.empty(K)
    G = np.empty(K)
    tG = np.empty(d)
    hw = np.empty(d)
    for e in range(E):
        u = src[e]
        L = hlen[e]
        amax = -1.0e300
        for j in range(L):
            hj = hidx[e, j]
            s = 0.0
            for c in range(d):
                diff = Zc[u, c] - Zc[hj, c]
                s += diff * diff
            a[j] = -s
            if a[j] > amax:
                amax = a[j]
            kap[j] = np.exp(-decc[u] * dt[e, j])
        asum = 0.0
        for j in range(L):
            alpha[j] = np.exp(a[j] - amax)
            asum += alpha[j]
        for j in range(L):
            alpha[j] /= asum
            w[j] = alpha[j] * kap[j]
        for i in range(K):
            ti = tgt[e, i]
            s = 0.0
            for c in range(d):
                diff = Zc[u, c] - Zc[ti, c]
                s += diff * diff
            acc = -s
            for j in range(L):
                hj = hidx[e, j]
                s2 = 0.0
                for c in range(d):
                    diff = Zc[hj, c] - Zc[ti, c]
                    s2 += diff * diff
                g[j, i] = -s2
                acc += w[j] * g[j, i]
            lam[i] = acc
        # loss terms and dL/dlam
        x = -lam[0]
        total += (x if x > 0.0 else 0.0) + np.log1p(np.exp(-abs(x)))
        G[0] = -1.0 / (1.0 + np.exp(min(lam[0], 500.0)))
        for i in range(1, K):
            if keep[e, i] != 0.0:
                x = lam[i]
                total += (x if x > 0.0 else 0.0) + np.log1p(np.exp(-abs(x)))
                G[i] = 1.0 / (1.0 + np.exp(-max(lam[i], -500.0)))
            else:
                G[i] = 0.0
        # base-rate path
        Gsum = 0.0
        for i in range(K):
            Gsum += G[i]
        for c in range(d):
            s = 0.0
            for i in range(K):
                s += G[i] * Zc[tgt[e, i], c]
            tG[c] = s
            gradZ[u, c] += -2.0 * (Gsum * Zc[u, c] - s)
        for i in range(K):
            ti = tgt[e, i]
            gi = 2.0 * G[i]
            for c in range(d):
                gradZ[ti, c] += gi * (Zc[u, c] - Zc[ti, c])
        if L > 0:
            # excitation path: the (history, target) weight factorizes as
            # w_j * G_i, so both scatters are rank-1 updates
            wsum = 0.0
            for c in range(d):
                hw[c] = 0.0
            for j in range(L):
                hj = hidx[e, j]
                wsum += w[j]
                for c in range(d):
                    hw[c] += w[j] * Zc[hj, c]
            for i in range(K):
                ti = tgt[e, i]
                gi = 2.0 * G[i]
                for c in range(d):
                    gradZ[ti, c] += gi * (hw[c] - wsum * Zc[ti, c])
            for j in range(L):
                hj = hidx[e, j]
                wj2 = 2.0 * w[j]
                for c in range(d):
                    gradZ[hj, c] += -wj2 * (Gsum * Zc[hj, c] - tG[c])
            # decay and attention paths
            dot = 0.0
            gasum = 0.0
            for j in range(L):
                Gw = 0.0
                for i in range(K):
                    Gw += G[i] * g[j, i]
                gradD[u] += Gw * w[j] * (-dt[e, j])
                a[j] = Gw * kap[j]  # reuse a as Gal
            for j in range(L):
                dot += a[j] * alpha[j]
            for j in range(L):
                ga = alpha[j] * (a[j] - dot)
                w[j] = ga  # reuse as the attention-path weights
                gasum += ga
                hj = hidx[e, j]
                ga2 = 2.0 * ga
                for c in range(d):
                    gradZ[hj, c] += ga2 * (Zc[u, c] - Zc[hj, c])
            for c in range(d):
                s = 0.0
                for j in range(L):
                    s += w[j] * Zc[hidx[e, j], c]
                gradZ[u, c] += -2.0 * (gasum * Zc[u, c] - s)
    return total


def _temporal_fused(
    table: EmbeddingTable, ctx: _Contexts, targets: np.ndarray, keep: np.ndarray
) -> tuple[float, SparseGrad]:
    E = ctx.src.size
    ids = np.unique(
        np.concatenate([ctx.src, targets.ravel(), ctx.hist_idx.ravel()])
    )
    src_c = np.searchsorted(ids, ctx.src)
    tgt_c = np.searchsorted(ids, targets)
    hid_c = np.searchsorted(ids, ctx.hist_idx)
    Zc = table.vectors[ids]
    decc = table.decay[ids]
    gradZ = np.zeros_like(Zc)
    gradD = np.zeros(ids.size)
    hlen = ctx.hist_mask.sum(axis=1).astype(np.int64)
    dt = ctx.t[:, None] - ctx.hist_t
    keep_full = np.concatenate(
        [np.ones((E, 1)), keep.astype(np.float64)], axis=1
    )
    total = _k_temporal(
        Zc, decc, src_c, tgt_c, hid_c, hlen, dt, keep_full, gradZ, gradD
    )
    gradZ /= E
    gradD /= E
    return float(total / E), SparseGrad(ids, gradZ, gradD)


def temporal_loss(
    batch: EdgeBatch,
    table: EmbeddingTable,
    sampler: NegativeSampler,
    negatives: int,
    *,
    graph: TemporalGraph,
    history_size: int,
    contexts: _Contexts | None = None,
) -> tuple[float, SparseGrad]:
    """Mean event loss ``-log s(lam_pos) - sum -log s(-lam_neg)`` over a batch.

    Negative targets are drawn from the degree-biased sampler, sharing the
    event's source and history.  Returns the loss and gradients for every
    touched embedding row and source decay.
    """
    if negatives < 1:
        raise ValueError("negatives must be >= 1")
    ctx = contexts if contexts is not None else build_contexts(
        graph, batch.events, history_size
    )
    negs, keep = _draw_negatives(sampler, ctx.src, ctx.tgt, negatives)
    targets = np.concatenate([ctx.tgt[:, None], negs], axis=1)
    if _HAVE_NUMBA:
        return _temporal_fused(table, ctx, targets, keep)
    return _temporal_numpy(table, ctx, targets, keep)


# ---------------------------------------------------------------------------
# subgraph alignment loss
# ---------------------------------------------------------------------------


def compute_centroids(table: EmbeddingTable, partition: Partition) -> np.ndarray:
    """Mean member embedding per subgraph, a (K, d) matrix."""
    if partition.node_count != table.node_count:
        raise ValueError("partition and table cover different node sets")
    K = partition.subgraph_count
    out = np.zeros((K, table.dim))
    np.add.at(out, partition.assignment, table.vectors)
    counts = np.bincount(partition.assignment, minlength=K).astype(np.float64)
    return out / counts[:, None]


def _student_t(z: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized and normalized t-kernel similarities of rows to centroids."""
    sq = (
        np.sum(z**2, axis=1)[:, None]
        + np.sum(centroids**2, axis=1)[None, :]
        - 2.0 * z @ centroids.T
    )
    np.maximum(sq, 0.0, out=sq)
    s = 1.0 / (1.0 + sq)
    return s, s / s.sum(axis=1, keepdims=True)


def soft_assignment(table: EmbeddingTable, centroids: np.ndarray) -> np.ndarray:
    """Row-stochastic Student's-t assignment of every node to every subgraph."""
    if centroids.ndim != 2 or centroids.shape[0] < 1:
        raise ValueError("need at least one centroid")
    _, q = _student_t(table.vectors, centroids)
    return q


def target_distribution(Q: np.ndarray) -> np.ndarray:
    """Sharpened target: square the assignments, normalize by column mass,
    then renormalize each row."""
    f = Q.sum(axis=0)
    w = Q**2 / f
    return w / w.sum(axis=1, keepdims=True)


def alignment_loss(
    target: np.ndarray,
    table: EmbeddingTable,
    centroids: np.ndarray,
    rows: np.ndarray,
) -> tuple[float, SparseGrad]:
    """KL(target row || live assignment row) summed over the given rows.

    The target is a constant; gradients flow through the live assignment into
    the row embeddings and the centroids.  Probabilities are floored at 1e-12
    inside the log.
    """
    rows = np.asarray(rows, dtype=np.int64)
    z = table.vectors[rows]
    s, q = _student_t(z, centroids)
    p = target[rows]
    ratio = np.log(np.maximum(p, _EPS)) - np.log(np.maximum(q, _EPS))
    loss = float(np.sum(np.where(p > 0, p * ratio, 0.0)))
    coef = 2.0 * s * (p - q)  # (r, K)
    diff = z[:, None, :] - centroids[None, :, :]  # (r, K, d)
    grad_z = np.einsum("rk,rkd->rd", coef, diff)
    grad_c = -np.einsum("rk,rkd->kd", coef, diff)
    order = np.argsort(rows)
    return loss, SparseGrad(
        ids=rows[order],
        vectors=grad_z[order],
        decay=np.zeros(rows.size),
        centroids=grad_c,
    )


# ---------------------------------------------------------------------------
# contrastive batch refinement loss
# ---------------------------------------------------------------------------


def _refine_numpy(
    table: EmbeddingTable,
    ctx: _Contexts,
    negs: np.ndarray,
    neg_mask: np.ndarray,
    temperature: float,
) -> tuple[float, SparseGrad]:
    E, h = ctx.hist_idx.shape
    Z = table.vectors
    pos_idx = np.concatenate([ctx.hist_idx, ctx.tgt[:, None]], axis=1)  # (E, P)
    pos_mask = np.concatenate(
        [ctx.hist_mask, np.ones((E, 1), dtype=bool)], axis=1
    )
    Zu, Zp, Zn = Z[ctx.src], Z[pos_idx], Z[negs]
    nu = np.linalg.norm(Zu, axis=1)
    npos = np.linalg.norm(Zp, axis=2)
    nneg = np.linalg.norm(Zn, axis=2)
    dp = np.einsum("ed,epd->ep", Zu, Zp)
    dn = np.einsum("ed,end->en", Zu, Zn)
    den_p = nu[:, None] * npos
    den_n = nu[:, None] * nneg
    cos_p = np.divide(dp, den_p, out=np.zeros_like(dp), where=den_p > 0)
    cos_n = np.divide(dn, den_n, out=np.zeros_like(dn), where=den_n > 0)
    xp = cos_p / temperature
    xn = np.where(neg_mask, cos_n / temperature, -np.inf)

    m = np.maximum(xp, np.max(xn, axis=1, initial=-np.inf)[:, None])  # (E, P)
    e_pos = np.exp(xp - m)
    e_neg = np.exp(xn[:, None, :] - m[:, :, None])  # (E, P, N); masked -> 0
    denom = e_pos + e_neg.sum(axis=2)
    losses = np.log(denom) + m - xp  # (E, P)
    counts = pos_mask.sum(axis=1)
    loss = float(np.sum(np.where(pos_mask, losses, 0.0) / counts[:, None]) / E)

    scale = pos_mask / counts[:, None] / E
    pi0 = e_pos / denom
    g_xp = (pi0 - 1.0) * scale  # (E, P)
    g_xn = np.einsum("epn,ep->en", e_neg / denom[:, :, None], scale)  # (E, N)
    g_cp = g_xp / temperature
    g_cn = g_xn / temperature

    # cosine backward: d cos(u,x)/du = x/(|u||x|) - cos * u/|u|^2
    inv_den_p = np.divide(1.0, den_p, out=np.zeros_like(den_p), where=den_p > 0)
    inv_den_n = np.divide(1.0, den_n, out=np.zeros_like(den_n), where=den_n > 0)
    inv_nu2 = np.divide(1.0, nu**2, out=np.zeros_like(nu), where=nu > 0)
    inv_np2 = np.divide(1.0, npos**2, out=np.zeros_like(npos), where=npos > 0)
    inv_nn2 = np.divide(1.0, nneg**2, out=np.zeros_like(nneg), where=nneg > 0)

    grad_u = np.einsum("ep,epd->ed", g_cp * inv_den_p, Zp)
    grad_u -= (np.sum(g_cp * cos_p, axis=1) * inv_nu2)[:, None] * Zu
    grad_u += np.einsum("en,end->ed", g_cn * inv_den_n, Zn)
    grad_u -= (np.sum(g_cn * cos_n, axis=1) * inv_nu2)[:, None] * Zu
    grad_p = (g_cp * inv_den_p)[:, :, None] * Zu[:, None, :]
    grad_p -= (g_cp * cos_p * inv_np2)[:, :, None] * Zp
    grad_n = (g_cn * inv_den_n)[:, :, None] * Zu[:, None, :]
    grad_n -= (g_cn * cos_n * inv_nn2)[:, :, None] * Zn

    d = Z.shape[1]
    rows = np.concatenate([ctx.src, pos_idx.ravel(), negs.ravel()])
    parts = np.concatenate([grad_u, grad_p.reshape(-1, d), grad_n.reshape(-1, d)])
    sg = _gather_sparse(rows, parts, np.empty(0, dtype=np.int64), np.empty(0))
    return loss, sg


@_njit(cache=True)
def _k_refine(Zc, src, pos, plen, neg, keep, invT, gradZ):
    """Fused per-event forward/backward for the contrastive loss."""
    E, P = pos.shape
    N = neg.shape[1]
    d = Zc.shape[1]
    total = 0.0
    cos_p = np.empty(P)
    nrm_p = np.empty(P)
    cos_n = np.empty(N)
    nrm_n = np.empty(N)
    xn = np.empty(N)
    pin = np.empty(N)
    gcn = np.empty(N)
    for e in range(E):
        u = src[e]
        nu = 0.0
        for c in range(d):
            nu += Zc[u, c] * Zc[u, c]
        nu = np.sqrt(nu)
        cnt = plen[e]
        for p in range(cnt):
            x = pos[e, p]
            s = 0.0
            nx = 0.0
            for c in range(d):
                s += Zc[u, c] * Zc[x, c]
                nx += Zc[x, c] * Zc[x, c]
            nx = np.sqrt(nx)
            nrm_p[p] = nx
            den = nu * nx
            cos_p[p] = s / den if den > 0.0 else 0.0
        xmax_n = -1.0e300
        for k in range(N):
            if keep[e, k] != 0.0:
                x = neg[e, k]
                s = 0.0
                nx = 0.0
                for c in range(d):
                    s += Zc[u, c] * Zc[x, c]
                    nx += Zc[x, c] * Zc[x, c]
                nx = np.sqrt(nx)
                nrm_n[k] = nx
                den = nu * nx
                cos_n[k] = s / den if den > 0.0 else 0.0
                xn[k] = cos_n[k] * invT
                if xn[k] > xmax_n:
                    xmax_n = xn[k]
            else:
                xn[k] = -1.0e300
            gcn[k] = 0.0
        inv_cnt = 1.0 / cnt
        for p in range(cnt):
            xp = cos_p[p] * invT
            m = xp if xp > xmax_n else xmax_n
            ep = np.exp(xp - m)
            sn = 0.0
            for k in range(N):
                if keep[e, k] != 0.0:
                    pin[k] = np.exp(xn[k] - m)
                    sn += pin[k]
                else:
                    pin[k] = 0.0
            denom = ep + sn
            total += (np.log(denom) + m - xp) * inv_cnt
            gxp = (ep / denom - 1.0) * inv_cnt * invT
            x = pos[e, p]
            den = nu * nrm_p[p]
            if den > 0.0 and gxp != 0.0:
                inv_den = 1.0 / den
                inv_nx2 = 1.0 / (nrm_p[p] * nrm_p[p])
                inv_nu2 = 1.0 / (nu * nu)
                cp = cos_p[p]
                for c in range(d):
                    gradZ[x, c] += gxp * (
                        Zc[u, c] * inv_den - cp * Zc[x, c] * inv_nx2
                    )
                    gradZ[u, c] += gxp * (
                        Zc[x, c] * inv_den - cp * Zc[u, c] * inv_nu2
                    )
            for k in range(N):
                if keep[e, k] != 0.0:
                    gcn[k] += (pin[k] / denom) * inv_cnt * invT
        for k in range(N):
            if keep[e, k] != 0.0 and gcn[k] != 0.0:
                x = neg[e, k]
                den = nu * nrm_n[k]
                if den > 0.0:
                    inv_den = 1.0 / den
                    inv_nx2 = 1.0 / (nrm_n[k] * nrm_n[k])
                    inv_nu2 = 1.0 / (nu * nu)
                    cn = cos_n[k]
                    for c in range(d):
                        gradZ[x, c] += gcn[k] * (
                            Zc[u, c] * inv_den - cn * Zc[x, c] * inv_nx2
                        )
                        gradZ[u, c] += gcn[k] * (
                            Zc[x, c] * inv_den - cn * Zc[u, c] * inv_nu2
                        )
    return total


def _refine_fused(
    table: EmbeddingTable,
    ctx: _Contexts,
    negs: np.ndarray,
    neg_mask: np.ndarray,
    temperature: float,
) -> tuple[float, SparseGrad]:
    E, h = ctx.hist_idx.shape
    hlen = ctx.hist_mask.sum(axis=1).astype(np.int64)
    pos = np.zeros((E, h + 1), dtype=np.int64)
    pos[:, :h] = ctx.hist_idx
    pos[np.arange(E), hlen] = ctx.tgt  # target right after the history
    ids = np.unique(np.concatenate([ctx.src, pos.ravel(), negs.ravel()]))
    src_c = np.searchsorted(ids, ctx.src)
    pos_c = np.searchsorted(ids, pos)
    neg_c = np.searchsorted(ids, negs)
    Zc = table.vectors[ids]
    gradZ = np.zeros_like(Zc)
    total = _k_refine(
        Zc, src_c, pos_c, hlen + 1, neg_c,
        neg_mask.astype(np.float64), 1.0 / temperature, gradZ,
    )
    gradZ /= E
    return float(total / E), SparseGrad(ids, gradZ, np.zeros(ids.size))


def batch_refinement_loss(
    batch: EdgeBatch,
    table: EmbeddingTable,
    sampler: NegativeSampler,
    history_size: int,
    negatives: int,
    temperature: float,
    *,
    graph: TemporalGraph,
    contexts: _Contexts | None = None,
) -> tuple[float, SparseGrad]:
    """Temperature-scaled contrastive loss rebuilding local adjacency.

    Per event, positives are the source's recent partners plus the target;
    each positive is contrasted against the event's sampled negatives on
    cosine similarity to the source.  Event loss is the mean over its
    positives, batch loss the mean over events.  Zero-norm embeddings get
    cosine 0 and a zero gradient.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    ctx = contexts if contexts is not None else build_contexts(
        graph, batch.events, history_size
    )
    negs, neg_mask = _draw_negatives(sampler, ctx.src, ctx.tgt, negatives)
    if _HAVE_NUMBA:
        return _refine_fused(table, ctx, negs, neg_mask, temperature)
    return _refine_numpy(table, ctx, negs, neg_mask, temperature)


# ---------------------------------------------------------------------------
# the training loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for offline pre-training."""

    epochs: int = 200
    batch_size: int = 1024
    learning_rate: float = 0.01
    intensity_negatives: int = 3
    history_size: int = 3
    refinement_negatives: int = 3
    temperature: float = 0.5
    seed: int = 0
    weight_temporal: float = 1.0
    weight_alignment: float = 1.0
    weight_refinement: float = 1.0
    clip_norm: float = 5.0
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        for name in ("batch_size", "intensity_negatives", "history_size",
                     "refinement_negatives"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss_temporal: float
    loss_alignment: float
    loss_refinement: float
    seconds: float

    def total(self) -> float:
        return self.loss_temporal + self.loss_alignment + self.loss_refinement


def _merge_and_clip(
    grads: list[SparseGrad], weights: list[float], clip_norm: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray | None, float]:
    """Combine weighted sparse grads, returning clipped dense-per-row pieces."""
    ids = np.unique(np.concatenate([g.ids for g in grads]))
    d = grads[0].vectors.shape[1]
    vec = np.zeros((ids.size, d))
    dec = np.zeros(ids.size)
    cent = None
    for g, w in zip(grads, weights):
        if w == 0.0:
            continue
        pos = np.searchsorted(ids, g.ids)
        vec[pos] += w * g.vectors
        dec[pos] += w * g.decay
        if g.centroids is not None:
            cent = w * g.centroids if cent is None else cent + w * g.centroids
    sq = float(np.sum(vec**2) + np.sum(dec**2))
    if cent is not None:
        sq += float(np.sum(cent**2))
    norm = np.sqrt(sq)
    if clip_norm > 0 and norm > clip_norm:
        scale = clip_norm / norm
        vec *= scale
        dec *= scale
        if cent is not None:
            cent *= scale
    return ids, vec, dec, cent, norm


def _epoch_seed(base: int, epoch: int, stream: int) -> tuple[int, int, int]:
    return (base, epoch, stream)


def pretrain(
    g: TemporalGraph,
    partition: Partition,
    init: EmbeddingTable,
    cfg: TrainConfig,
    *,
    start_epoch: int = 0,
    detemporal: DeTemporalGraph | None = None,
    on_epoch=None,
) -> tuple[EmbeddingTable, list[EpochStats]]:
    """Run the three-objective descent over chronological batches.

    Per epoch: centroids and the alignment target are recomputed once, then
    every batch contributes one SGD step on the summed losses.  Negative
    draws are reseeded per epoch from the config seed, so training resumed
    from a checkpoint at epoch ``k`` reproduces an uninterrupted run exactly.

    Returns the trained table (the input is not mutated) and per-epoch stats.
    """
    if partition.node_count != g.node_count:
        raise ValueError("partition does not cover the graph")
    if init.node_count != g.node_count:
        raise ValueError("embedding table does not cover the graph")
    table = init.copy()
    stats: list[EpochStats] = []
    if cfg.epochs <= start_epoch:
        return table, stats
    det = detemporal if detemporal is not None else detemporalize(g)
    base_sampler = make_negative_sampler(det, cfg.seed)

    stream = oriented_stream(g)
    n_events = stream.shape[0]
    bs = cfg.batch_size
    batch_slices = [
        (i, slice(s, min(s + bs, n_events)))
        for i, s in enumerate(range(0, n_events, bs))
    ]
    ctx_cache = [
        build_contexts(g, stream[sl], cfg.history_size) for _, sl in batch_slices
    ]

    Z, decay = table.vectors, table.decay
    lr = cfg.learning_rate
    for epoch in range(start_epoch, cfg.epochs):
        t0 = time.perf_counter()
        centroids = compute_centroids(table, partition)
        P = target_distribution(soft_assignment(table, centroids))
        samp_tmp = base_sampler.spawn(_epoch_seed(cfg.seed, epoch, 0))
        samp_ref = base_sampler.spawn(_epoch_seed(cfg.seed, epoch, 1))
        sums = np.zeros(3)
        for (bi, sl), ctx in zip(batch_slices, ctx_cache):
            batch = EdgeBatch(events=stream[sl], index=bi)
            l_tmp, g_tmp = temporal_loss(
                batch, table, samp_tmp, cfg.intensity_negatives,
                graph=g, history_size=cfg.history_size, contexts=ctx,
            )
            rows = np.unique(batch.events[:, :2])
            l_aln, g_aln = alignment_loss(P, table, centroids, rows)
            aln_scale = 1.0 / rows.size
            l_ref, g_ref = batch_refinement_loss(
                batch, table, samp_ref, cfg.history_size,
                cfg.refinement_negatives, cfg.temperature,
                graph=g, contexts=ctx,
            )
            total = (
                cfg.weight_temporal * l_tmp
                + cfg.weight_alignment * l_aln * aln_scale
                + cfg.weight_refinement * l_ref
            )
            if not np.isfinite(total):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {bi}: "
                    f"tmp={l_tmp} node={l_aln} batch={l_ref}"
                )
            ids, vec, dec, cent, _ = _merge_and_clip(
                [g_tmp, g_aln, g_ref],
                [cfg.weight_temporal, cfg.weight_alignment * aln_scale,
                 cfg.weight_refinement],
                cfg.clip_norm,
            )
            Z[ids] -= lr * vec
            decay[ids] = np.abs(decay[ids] - lr * dec)
            np.maximum(decay, np.finfo(np.float64).tiny, out=decay)
            if cent is not None:
                centroids -= lr * cent
            sums += (l_tmp, l_aln * aln_scale, l_ref)
        n_batches = len(batch_slices)
        st = EpochStats(
            epoch=epoch,
            loss_temporal=sums[0] / n_batches,
            loss_alignment=sums[1] / n_batches,
            loss_refinement=sums[2] / n_batches,
            seconds=time.perf_counter() - t0,
        )
        stats.append(st)
        if on_epoch is not None:
            on_epoch(st, table)
    return table, stats
