"""Pure numpy versions of the compiled kernels in ``_ext.pyx``."""

from __future__ import annotations

import numpy as np


def _find(parent: list[int], x: int) -> int:
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def kruskal_scan(order: np.ndarray, ii: np.ndarray, jj: np.ndarray, n: int) -> np.ndarray:
    parent = list(range(n))
    rank = [0] * n
    acc: list[int] = []
    ii_l = ii.tolist()
    jj_l = jj.tolist()
    for e in order.tolist():
        if len(acc) == n - 1:
            break
        a = _find(parent, ii_l[e])
        b = _find(parent, jj_l[e])
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1
        acc.append(e)
    return np.asarray(acc, dtype=np.int64)


def cut_counts(ei: np.ndarray, ej: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels[:, ei] != labels[:, ej]).sum(axis=1).astype(np.int64)


class NeighborCache:
    """Dense distance matrix; the k nearest are selected on demand.

    Ties on distance go to the earlier-inserted training point, which matches
    the sorted-insertion order of the compiled cache.
    """

    def __init__(self, points, capacity: int):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.capacity = max(int(capacity), 1)
        self.dist = np.empty((self.points.shape[0], self.capacity))
        self.lab = np.empty(self.capacity, dtype=np.int8)
        self.active = np.ones(self.points.shape[0], dtype=bool)
        self.size = 0

    def deactivate(self, row: int) -> None:
        self.active[row] = False

    def insert(self, point, label: int) -> None:
        q = np.asarray(point, dtype=np.float64)
        if self.size == self.capacity:
            self.capacity *= 2
            dist = np.empty((self.points.shape[0], self.capacity))
            dist[:, : self.size] = self.dist[:, : self.size]
            self.dist = dist
            self.lab = np.concatenate([self.lab, np.empty_like(self.lab)])
        acc = np.zeros(self.points.shape[0])
        for j in range(self.points.shape[1]):
            diff = self.points[:, j] - q[j]
            acc = acc + diff * diff
        self.dist[:, self.size] = acc
        self.lab[self.size] = label
        self.size += 1

    def count_ones(self, k: int) -> np.ndarray:
        out = np.full(self.points.shape[0], -1, dtype=np.int64)
        rows = np.flatnonzero(self.active)
        kk = min(int(k), self.size)
        if rows.size == 0:
            return out
        if kk == 0:
            out[rows] = 0
            return out
        D = self.dist[rows, : self.size]
        lab = self.lab[: self.size].astype(np.int64)
        thr = np.partition(D, kk - 1, axis=1)[:, kk - 1]
        less = D < thr[:, None]
        need = kk - less.sum(axis=1)
        eq = D == thr[:, None]
        take = eq & (np.cumsum(eq, axis=1) <= need[:, None])
        out[rows] = ((less | take) * lab).sum(axis=1)
        return out
