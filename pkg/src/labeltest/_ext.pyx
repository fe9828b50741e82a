# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Semantics must match ``labeltest._pure`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.string cimport memmove

cnp.import_array()


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t x) noexcept nogil:
    cdef Py_ssize_t root = x, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


def kruskal_scan(const cnp.int64_t[::1] order, const cnp.int64_t[::1] ii,
                 const cnp.int64_t[::1] jj, Py_ssize_t n):
    """Positions (into ``order``) of the edges Kruskal accepts, in acceptance order."""
    cdef Py_ssize_t[::1] parent = np.arange(n, dtype=np.intp)
    cdef Py_ssize_t[::1] rank = np.zeros(n, dtype=np.intp)
    out = np.empty(max(n - 1, 0), dtype=np.int64)
    cdef cnp.int64_t[::1] acc = out
    cdef Py_ssize_t m = order.shape[0], t, e, a, b, got = 0
    with nogil:
        for t in range(m):
            if got == n - 1:
                break
            e = order[t]
            a = _find(parent, ii[e])
            b = _find(parent, jj[e])
            if a == b:
                continue
            if rank[a] < rank[b]:
                a, b = b, a
            parent[b] = a
            if rank[a] == rank[b]:
                rank[a] += 1
            acc[got] = e
            got += 1
    return out[:got]


def cut_counts(const cnp.int64_t[::1] ei, const cnp.int64_t[::1] ej,
               const cnp.int8_t[:, ::1] labels):
    """Cut-edge count of each labeling row."""
    cdef Py_ssize_t p, e, P = labels.shape[0], m = ei.shape[0]
    out = np.zeros(P, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    cdef cnp.int64_t c
    with nogil:
        for p in range(P):
            c = 0
            for e in range(m):
                c += labels[p, ei[e]] != labels[p, ej[e]]
            res[p] = c
    return out


cdef class NeighborCache:
    """Per-point training neighbours kept sorted by (squared distance, insertion order).

    Inserting a training point costs one distance and one shifted row per
    active point, so a k-NN vote over a fixed set of query points never has to
    be recomputed from scratch as the training set grows.
    """

    cdef const double[:, ::1] points
    cdef double[:, ::1] dist
    cdef cnp.int8_t[:, ::1] lab
    cdef cnp.uint8_t[::1] active
    cdef readonly Py_ssize_t size
    cdef readonly Py_ssize_t capacity

    def __init__(self, points, Py_ssize_t capacity):
        pts = np.ascontiguousarray(points, dtype=np.float64)
        self.points = pts
        self.capacity = max(capacity, 1)
        self.dist = np.empty((pts.shape[0], self.capacity), dtype=np.float64)
        self.lab = np.empty((pts.shape[0], self.capacity), dtype=np.int8)
        self.active = np.ones(pts.shape[0], dtype=np.uint8)
        self.size = 0

    cdef void _grow(self):
        cdef Py_ssize_t cap = self.capacity * 2
        d = np.empty((self.dist.shape[0], cap), dtype=np.float64)
        l = np.empty((self.dist.shape[0], cap), dtype=np.int8)
        d[:, : self.size] = np.asarray(self.dist)[:, : self.size]
        l[:, : self.size] = np.asarray(self.lab)[:, : self.size]
        self.dist = d
        self.lab = l
        self.capacity = cap

    def deactivate(self, Py_ssize_t row):
        self.active[row] = 0

    def insert(self, point, int label):
        cdef const double[::1] q = np.ascontiguousarray(point, dtype=np.float64)
        if self.size == self.capacity:
            self._grow()
        cdef Py_ssize_t r, j, lo, hi, mid, T = self.size
        cdef Py_ssize_t U = self.points.shape[0], d = self.points.shape[1]
        cdef double acc, diff
        cdef cnp.int8_t z = label
        with nogil:
            for r in range(U):
                if not self.active[r]:
                    continue
                acc = 0.0
                for j in range(d):
                    diff = self.points[r, j] - q[j]
                    acc = acc + diff * diff
                # bisect_right: new point goes after equal distances (larger index)
                lo = 0
                hi = T
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if acc < self.dist[r, mid]:
                        hi = mid
                    else:
                        lo = mid + 1
                if lo < T:
                    memmove(&self.dist[r, lo + 1], &self.dist[r, lo], (T - lo) * sizeof(double))
                    memmove(&self.lab[r, lo + 1], &self.lab[r, lo], (T - lo) * sizeof(cnp.int8_t))
                self.dist[r, lo] = acc
                self.lab[r, lo] = z
        self.size = T + 1

    def count_ones(self, Py_ssize_t k):
        """Label-1 count among the ``min(k, size)`` nearest; -1 for inactive rows."""
        cdef Py_ssize_t U = self.points.shape[0], r, j
        cdef Py_ssize_t kk = k if k < self.size else self.size
        out = np.empty(U, dtype=np.int64)
        cdef cnp.int64_t[::1] res = out
        cdef cnp.int64_t c
        with nogil:
            for r in range(U):
                if not self.active[r]:
                    res[r] = -1
                    continue
                c = 0
                for j in range(kk):
                    c += self.lab[r, j]
                res[r] = c
        return out
