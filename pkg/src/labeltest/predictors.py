"""Nonparametric class-probability predictors Q(z | s): k-NN, Gaussian kernel, grid partition.

Every predictor returns probabilities clamped to ``[clip_eps, 1 - clip_eps]``
with ``q0 = 1 - q1``. Predictions for a point never use that point's label
unless it was explicitly added with :meth:`Predictor.update`.

For repeated scoring of one fixed point set (the unlabeled pool) call
:meth:`Predictor.attach` once; afterwards :meth:`Predictor.predict_attached`
reflects every later update without recomputing from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from labeltest import _backend
from labeltest.core import DimensionMismatch, LabeledSet, LabelTestError, as_features, as_labels

DEFAULT_CLIP_EPS = 1e-3


class EmptyTraining(LabelTestError, ValueError):
    pass


class BadHyperparameter(LabelTestError, ValueError):
    pass


@dataclass(frozen=True)
class KNN:
    """k nearest neighbours; ``k=None`` means ceil(sqrt(training size)), re-evaluated on update."""

    k: int | None = None


@dataclass(frozen=True)
class Kernel:
    """Gaussian kernel; ``bandwidth=None`` means half the median pairwise training distance."""

    bandwidth: float | None = None


@dataclass(frozen=True)
class Partition:
    """Uniform grid of ``bins`` cells per split axis over the box [lo, hi].

    Only the first ``min(d, 2)`` axes are split. Without a box the training
    set's bounding box at fit time is used.
    """

    bins: int = 8
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None


PredictorKind = KNN | Kernel | Partition


def _upper_clip(eps: float) -> float:
    hi = 1.0 - eps
    while 1.0 - hi < eps:
        hi = math.nextafter(hi, 0.0)
    return hi


class Predictor:
    """Base class; subclasses implement ``_raw_q1`` and the incremental hooks."""

    def __init__(self, clip_eps: float = DEFAULT_CLIP_EPS):
        if not 0.0 < clip_eps < 0.5:
            raise BadHyperparameter(f"clip_eps must lie in (0, 0.5), got {clip_eps}")
        self.clip_eps = float(clip_eps)
        self._hi = _upper_clip(self.clip_eps)
        self._X = np.empty((0, 0))
        self._y = np.empty(0, dtype=np.int8)
        self._n = 0
        self.n_updates = 0
        self._attached: np.ndarray | None = None

    # -- training set -------------------------------------------------------
    def __len__(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return self._X.shape[1]

    @property
    def training(self) -> LabeledSet:
        return LabeledSet(self._X[: self._n].copy(), self._y[: self._n].copy())

    @property
    def X(self) -> np.ndarray:
        return self._X[: self._n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self._n]

    def _set_training(self, X: np.ndarray, y: np.ndarray) -> None:
        if X.shape[0] == 0:
            raise EmptyTraining("training set is empty")
        cap = max(16, 2 * X.shape[0])
        self._X = np.empty((cap, X.shape[1]))
        self._y = np.empty(cap, dtype=np.int8)
        self._X[: X.shape[0]] = X
        self._y[: X.shape[0]] = y
        self._n = X.shape[0]

    def _append(self, s: np.ndarray, z: int) -> None:
        if self._n == self._X.shape[0]:
            self._X = np.concatenate([self._X, np.empty_like(self._X)])
            self._y = np.concatenate([self._y, np.empty_like(self._y)])
        self._X[self._n] = s
        self._y[self._n] = z
        self._n += 1

    def _check_dim(self, pts: np.ndarray) -> None:
        if pts.shape[1] != self.dim:
            raise DimensionMismatch(f"expected dimension {self.dim}, got {pts.shape[1]}")

    # -- public API ---------------------------------------------------------
    def fit(self, training: LabeledSet) -> "Predictor":
        X = training.features
        y = training.labels
        self._set_training(X, y)
        self._refit()
        if self._attached is not None:
            self._reattach()
        return self

    def update(self, s, z: int) -> "Predictor":
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        if s.shape != (self.dim,):
            raise DimensionMismatch(f"expected dimension {self.dim}, got {s.shape}")
        z = int(z)
        if z not in (0, 1):
            raise ValueError("label must be 0 or 1")
        self._append(s, z)
        self.n_updates += 1
        self._on_update(s, z)
        return self

    def clip(self, q1: np.ndarray) -> np.ndarray:
        return np.clip(q1, self.clip_eps, self._hi)

    def predict_proba1(self, points) -> np.ndarray:
        """Clipped Q(1 | s) for each row of ``points``."""
        pts = as_features(points)
        self._check_dim(pts)
        return self.clip(self._raw_q1(pts))

    def predict(self, s) -> tuple[float, float]:
        q1 = float(self.predict_proba1(np.atleast_1d(np.asarray(s, dtype=np.float64))[None, :])[0])
        return 1.0 - q1, q1

    def attach(self, points) -> None:
        """Register a fixed point set for repeated scoring."""
        pts = as_features(points)
        self._check_dim(pts)
        self._attached = pts
        self._reattach()

    def detach_row(self, row: int) -> None:
        """Stop scoring one attached point (it has been labeled)."""

    def predict_attached(self) -> np.ndarray:
        if self._attached is None:
            raise RuntimeError("no point set attached")
        return self.clip(self._attached_raw_q1())

    # -- hooks --------------------------------------------------------------
    def _refit(self) -> None:
        pass

    def _on_update(self, s: np.ndarray, z: int) -> None:
        self._refit()

    def _reattach(self) -> None:
        pass

    def _attached_raw_q1(self) -> np.ndarray:
        return self._raw_q1(self._attached)

    def _raw_q1(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _global_fraction(self) -> float:
        return float(self.y.mean())


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """(len(A), len(B)) squared distances, accumulated coordinate by coordinate."""
    acc = np.zeros((A.shape[0], B.shape[0]))
    for c in range(A.shape[1]):
        diff = A[:, c, None] - B[None, :, c]
        acc += diff * diff
    return acc


class KNNPredictor(Predictor):
    """Vote fraction among the k nearest training points; distance ties go to lower training index."""

    def __init__(self, k: int | None = None, clip_eps: float = DEFAULT_CLIP_EPS):
        if k is not None and (int(k) != k or k < 1):
            raise BadHyperparameter(f"k must be a positive integer, got {k}")
        super().__init__(clip_eps)
        self.k_fixed = None if k is None else int(k)
        self._cache = None

    @property
    def k(self) -> int:
        if self.k_fixed is not None:
            return min(self.k_fixed, self._n)
        return min(math.ceil(math.sqrt(self._n)), self._n)

    def _raw_q1(self, pts: np.ndarray) -> np.ndarray:
        D = _sq_dists(pts, self.X)
        k = self.k
        nearest = np.argsort(D, axis=1, kind="stable")[:, :k]
        return self.y[nearest].sum(axis=1) / k

    def _on_update(self, s: np.ndarray, z: int) -> None:
        if self._cache is not None:
            self._cache.insert(s, z)

    def _reattach(self) -> None:
        cap = max(64, 2 * self._n)
        self._cache = _backend.NeighborCache(self._attached, cap)
        for s, z in zip(self.X, self.y.tolist()):
            self._cache.insert(s, z)

    def detach_row(self, row: int) -> None:
        if self._cache is not None:
            self._cache.deactivate(row)

    def _attached_raw_q1(self) -> np.ndarray:
        counts = self._cache.count_ones(self.k).astype(np.float64)
        counts[counts < 0] = np.nan
        return counts / self.k


class KernelPredictor(Predictor):
    """Gaussian-weighted label average."""

    def __init__(self, bandwidth: float | None = None, clip_eps: float = DEFAULT_CLIP_EPS):
        if bandwidth is not None and not (math.isfinite(bandwidth) and bandwidth > 0):
            raise BadHyperparameter(f"bandwidth must be positive, got {bandwidth}")
        super().__init__(clip_eps)
        self.bandwidth_fixed = bandwidth
        self.bandwidth = bandwidth if bandwidth is not None else 1.0

    def _refit(self) -> None:
        if self.bandwidth_fixed is not None:
            return
        X = self.X
        if X.shape[0] < 2:
            self.bandwidth = 1.0
            return
        D = _sq_dists(X, X)
        med = float(np.median(np.sqrt(D[np.triu_indices(X.shape[0], k=1)])))
        self.bandwidth = med / 2 if med > 0 else 1.0

    def _raw_q1(self, pts: np.ndarray) -> np.ndarray:
        D = _sq_dists(pts, self.X)
        D -= D.min(axis=1, keepdims=True)
        W = np.exp(-D / (2.0 * self.bandwidth**2))
        return (W @ self.y.astype(np.float64)) / W.sum(axis=1)


class PartitionPredictor(Predictor):
    """Label fraction in the grid cell containing s; empty cells fall back to the global fraction."""

    def __init__(self, bins: int = 8, lo=None, hi=None, clip_eps: float = DEFAULT_CLIP_EPS):
        if int(bins) != bins or bins < 1:
            raise BadHyperparameter(f"bins must be a positive integer, got {bins}")
        super().__init__(clip_eps)
        self.bins = int(bins)
        self.lo = None if lo is None else np.atleast_1d(np.asarray(lo, dtype=np.float64))
        self.hi = None if hi is None else np.atleast_1d(np.asarray(hi, dtype=np.float64))
        self._ones = np.zeros(0)
        self._count = np.zeros(0)
        self._attached_cells: np.ndarray | None = None

    @property
    def n_cells(self) -> int:
        return self.bins ** min(self.dim, 2)

    def cell_of(self, pts: np.ndarray) -> np.ndarray:
        cell = np.zeros(pts.shape[0], dtype=np.int64)
        for c in range(min(self.dim, 2)):
            width = self.hi[c] - self.lo[c]
            if width > 0:
                b = np.floor((pts[:, c] - self.lo[c]) / width * self.bins).astype(np.int64)
                b = np.clip(b, 0, self.bins - 1)
            else:
                b = np.zeros(pts.shape[0], dtype=np.int64)
            cell = cell * self.bins + b
        return cell

    def _refit(self) -> None:
        X = self.X
        if self.lo is None:
            self.lo = X.min(axis=0)
        if self.hi is None:
            self.hi = X.max(axis=0)
        if self.lo.shape != (self.dim,) or self.hi.shape != (self.dim,):
            raise DimensionMismatch("partition box does not match feature dimension")
        cells = self.cell_of(X)
        self._count = np.bincount(cells, minlength=self.n_cells).astype(np.float64)
        self._ones = np.bincount(cells, weights=self.y.astype(np.float64), minlength=self.n_cells)

    def _on_update(self, s: np.ndarray, z: int) -> None:
        c = int(self.cell_of(s[None, :])[0])
        self._count[c] += 1
        self._ones[c] += z

    def _cell_q1(self, cells: np.ndarray) -> np.ndarray:
        n = self._count[cells]
        with np.errstate(invalid="ignore", divide="ignore"):
            q = self._ones[cells] / n
        return np.where(n > 0, q, self._global_fraction())

    def _raw_q1(self, pts: np.ndarray) -> np.ndarray:
        return self._cell_q1(self.cell_of(pts))

    def _reattach(self) -> None:
        self._attached_cells = self.cell_of(self._attached)

    def _attached_raw_q1(self) -> np.ndarray:
        return self._cell_q1(self._attached_cells)


def make_predictor(kind: PredictorKind, clip_eps: float = DEFAULT_CLIP_EPS) -> Predictor:
    if isinstance(kind, KNN):
        return KNNPredictor(kind.k, clip_eps)
    if isinstance(kind, Kernel):
        return KernelPredictor(kind.bandwidth, clip_eps)
    if isinstance(kind, Partition):
        return PartitionPredictor(kind.bins, kind.lo, kind.hi, clip_eps)
    raise BadHyperparameter(f"unknown predictor kind {kind!r}")


def fit(kind: PredictorKind, training: LabeledSet, clip_eps: float = DEFAULT_CLIP_EPS) -> Predictor:
    if len(training) == 0:
        raise EmptyTraining("training set is empty")
    return make_predictor(kind, clip_eps).fit(training)


def fit_arrays(kind: PredictorKind, X, y, clip_eps: float = DEFAULT_CLIP_EPS) -> Predictor:
    X = as_features(X)
    y = as_labels(y)
    if X.shape[0] == 0:
        raise EmptyTraining("training set is empty")
    return fit(kind, LabeledSet(X, y), clip_eps)


def with_pool_box(kind: PredictorKind, features: np.ndarray) -> PredictorKind:
    """Give a box-less Partition the bounding box of ``features``."""
    if isinstance(kind, Partition) and (kind.lo is None or kind.hi is None):
        return Partition(
            kind.bins,
            tuple(features.min(axis=0).tolist()) if kind.lo is None else kind.lo,
            tuple(features.max(axis=0).tolist()) if kind.hi is None else kind.hi,
        )
    return kind
