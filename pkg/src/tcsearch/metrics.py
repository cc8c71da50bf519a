"""Effectiveness metrics and ground-truth community handling.

All three metrics compare one predicted member set against one ground-truth
community; NMI treats both as binary labelings over the full node set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Collection

import numpy as np

__all__ = ["GroundTruth", "f1", "jaccard", "nmi", "load_ground_truth", "save_ground_truth"]


@dataclass(frozen=True)
class GroundTruth:
    """Reference communities; overlap is permitted if the source data has it."""

    communities: tuple[frozenset[int], ...]

    def __post_init__(self):
        if any(not c for c in self.communities):
            raise ValueError("ground-truth communities must be non-empty")

    @property
    def community_count(self) -> int:
        return len(self.communities)


def f1(pred: Collection[int], truth: Collection[int]) -> float:
    """Harmonic mean of membership precision and recall (0 for empty pred)."""
    truth = set(truth)
    if not truth:
        raise ValueError("truth community must be non-empty")
    pred = set(pred)
    if not pred:
        return 0.0
    hit = len(pred & truth)
    if hit == 0:
        return 0.0
    precision = hit / len(pred)
    recall = hit / len(truth)
    return 2.0 * precision * recall / (precision + recall)


def jaccard(pred: Collection[int], truth: Collection[int]) -> float:
    """Intersection over union of the two member sets."""
    truth = set(truth)
    if not truth:
        raise ValueError("truth community must be non-empty")
    pred = set(pred)
    return len(pred & truth) / len(pred | truth)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred: Collection[int], truth: Collection[int], n: int) -> float:
    """Normalized mutual information of the binary member/non-member labelings.

    ``2 I(X;Y) / (H(X) + H(Y))`` with natural logs over the 2x2 contingency
    table of the n nodes.  If both labelings are constant the value is 1 when
    they are identical and 0 otherwise.
    """
    pred, truth = set(pred), set(truth)
    if not 1 <= len(truth) <= n:
        raise ValueError("truth community size must be in [1, n]")
    if any(not 0 <= v < n for v in pred | truth):
        raise ValueError("node id out of range")
    n11 = len(pred & truth)
    n10 = len(pred) - n11
    n01 = len(truth) - n11
    n00 = n - n11 - n10 - n01
    table = np.array([[n11, n10], [n01, n00]], dtype=np.float64)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    hx = _entropy(rows, n)
    hy = _entropy(cols, n)
    if hx + hy == 0.0:
        return 1.0 if pred == truth else 0.0
    info = 0.0
    for i in range(2):
        for j in range(2):
            nij = table[i, j]
            if nij > 0:
                info += (nij / n) * math.log(nij * n / (rows[i] * cols[j]))
    return 2.0 * info / (hx + hy)


def load_ground_truth(path: str | Path) -> GroundTruth:
    """One community per line, whitespace-separated node ids; '#' comments."""
    comms: list[frozenset[int]] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                members = frozenset(int(tok) for tok in line.split())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if not members:
                continue
            comms.append(members)
    if not comms:
        raise ValueError(f"{path}: no communities found")
    return GroundTruth(tuple(comms))


def save_ground_truth(gt: GroundTruth, path: str | Path) -> None:
    with open(path, "w") as fh:
        for comm in gt.communities:
            fh.write(" ".join(str(v) for v in sorted(comm)) + "\n")
