"""Euclidean MST and the Friedman-Rafsky cut-edge test."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb, ndtr

from labeltest import _backend
from labeltest.core import DimensionMismatch, LabelTestError, LengthMismatch, as_features

EXHAUSTIVE_LIMIT = 10_000
MIN_PERMUTATIONS = 100


class TooFewPoints(LabelTestError, ValueError):
    pass


class InvalidCounts(LabelTestError, ValueError):
    pass


class ZeroVariance(LabelTestError, ValueError):
    pass


@dataclass(frozen=True)
class MST:
    """Spanning tree edges ``(i, j, weight)`` with ``i < j``, in Kruskal acceptance order."""

    i: np.ndarray
    j: np.ndarray
    weight: np.ndarray
    n: int

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(w)) for a, b, w in zip(self.i, self.j, self.weight)]

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weight.tolist())


def pairwise_distances(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Upper-triangle pairs ``(i, j)``, i < j, in lexicographic order, with Euclidean distances."""
    n = points.shape[0]
    ii, jj = np.triu_indices(n, k=1)
    acc = np.zeros(ii.shape[0])
    for c in range(points.shape[1]):
        diff = points[ii, c] - points[jj, c]
        acc += diff * diff
    return ii.astype(np.int64), jj.astype(np.int64), np.sqrt(acc)


def euclidean_mst(points) -> MST:
    """Kruskal over the complete graph.

    Edges are ordered by (weight, min index, max index), so ties resolve to the
    lowest index pair and the tree is a deterministic function of the input.
    """
    if isinstance(points, (list, tuple)) and points:
        dims = {np.atleast_1d(np.asarray(p)).shape for p in points}
        if len(dims) > 1:
            raise DimensionMismatch(f"inconsistent point dimensions {sorted(dims)}")
    pts = as_features(points)
    n = pts.shape[0]
    if n < 2:
        raise TooFewPoints("need at least 2 points")
    ii, jj, w = pairwise_distances(pts)
    # pairs are already lexicographic, so a stable sort on weight gives the full key
    order = np.argsort(w, kind="stable").astype(np.int64)
    acc = _backend.kruskal_scan(order, ii, jj, n)
    return MST(i=ii[acc], j=jj[acc], weight=w[acc], n=n)


def cut_edge_count(mst: MST, labels) -> int:
    labels = np.asarray(labels)
    if labels.shape[0] != mst.n:
        raise LengthMismatch(f"{labels.shape[0]} labels for {mst.n} vertices")
    return int(np.count_nonzero(labels[mst.i] != labels[mst.j]))


class MomentMethod(str, enum.Enum):
    PERMUTATION = "Permutation"
    EXHAUSTIVE = "Exhaustive"


@dataclass(frozen=True)
class NullMoments:
    mean: float
    var: float
    method: MomentMethod
    num_draws: int


def _check_counts(mst: MST, n0: int, n1: int) -> None:
    if n0 < 1 or n1 < 1 or n0 + n1 != mst.n:
        raise InvalidCounts(f"need n0, n1 >= 1 with n0 + n1 = {mst.n}, got {n0}, {n1}")


def is_exhaustive(n: int, n1: int) -> bool:
    return comb(n, n1, exact=True) <= EXHAUSTIVE_LIMIT


def all_labelings(n: int, n1: int) -> np.ndarray:
    """Every 0/1 vector of length n with n1 ones, as int8 rows."""
    combos = list(itertools.combinations(range(n), n1))
    out = np.zeros((len(combos), n), dtype=np.int8)
    if n1:
        rows = np.repeat(np.arange(len(combos)), n1)
        out[rows, np.asarray(combos).ravel()] = 1
    return out


def permuted_labelings(labels: np.ndarray, num_perms: int, rng: np.random.Generator) -> np.ndarray:
    tiled = np.tile(np.asarray(labels, dtype=np.int8), (num_perms, 1))
    return np.ascontiguousarray(rng.permuted(tiled, axis=1))


def null_cut_counts(
    mst: MST, n0: int, n1: int, num_perms: int, rng: np.random.Generator
) -> tuple[np.ndarray, MomentMethod]:
    """Cut counts over every labeling when there are at most 10,000, else over random permutations."""
    _check_counts(mst, n0, n1)
    if is_exhaustive(mst.n, n1):
        labs = all_labelings(mst.n, n1)
        method = MomentMethod.EXHAUSTIVE
    else:
        if num_perms < MIN_PERMUTATIONS:
            raise ValueError(f"num_perms must be >= {MIN_PERMUTATIONS}")
        base = np.zeros(mst.n, dtype=np.int8)
        base[:n1] = 1
        labs = permuted_labelings(base, num_perms, rng)
        method = MomentMethod.PERMUTATION
    return _backend.cut_counts(mst.i, mst.j, labs), method


def null_moments(mst: MST, n0: int, n1: int, num_perms: int, rng: np.random.Generator) -> NullMoments:
    counts, method = null_cut_counts(mst, n0, n1, num_perms, rng)
    c = counts.astype(np.float64)
    return NullMoments(mean=float(c.mean()), var=float(c.var()), method=method, num_draws=int(c.size))


def fr_statistic(r_n: float, moments: NullMoments) -> float:
    if not moments.var > 0:
        raise ZeroVariance("null variance of the cut count is zero")
    return (r_n - moments.mean) / math.sqrt(moments.var)


def fr_p_value_normal(w_n: float) -> float:
    if not math.isfinite(w_n):
        raise ValueError("w_n must be finite")
    return float(ndtr(w_n))


def fr_p_value_permutation(mst: MST, labels, num_perms: int, rng: np.random.Generator) -> float:
    """Left-tail permutation p-value; small cut counts are evidence against H0.

    Exhaustive enumeration returns the raw proportion ``#{r <= r_obs} / C(n, n1)``;
    random permutations use ``(1 + #{r <= r_obs}) / (1 + num_perms)``.
    """
    labels = np.asarray(labels)
    n1 = int(np.count_nonzero(labels))
    n0 = labels.shape[0] - n1
    r_obs = cut_edge_count(mst, labels)
    counts, method = null_cut_counts(mst, n0, n1, num_perms, rng)
    hits = int(np.count_nonzero(counts <= r_obs))
    if method is MomentMethod.EXHAUSTIVE:
        return hits / counts.size
    return (1 + hits) / (1 + counts.size)


class PValueMode(str, enum.Enum):
    PERMUTATION = "permutation"
    NORMAL = "normal"


@dataclass(frozen=True)
class FRResult:
    r_n: int
    w_n: float
    p_value: float
    moments: NullMoments


def fr_test(
    points,
    labels,
    *,
    mode: PValueMode | str = PValueMode.PERMUTATION,
    num_perms: int = 1000,
    rng: np.random.Generator,
) -> FRResult:
    """Full FR test: MST, cut count, permutation moments, and a p-value.

    One set of null draws serves both the moments and, in permutation mode,
    the p-value.
    """
    mode = PValueMode(mode)
    mst = euclidean_mst(points)
    labels = np.asarray(labels)
    if labels.shape[0] != mst.n:
        raise LengthMismatch(f"{labels.shape[0]} labels for {mst.n} points")
    n1 = int(np.count_nonzero(labels))
    n0 = mst.n - n1
    r_obs = cut_edge_count(mst, labels)
    counts, method = null_cut_counts(mst, n0, n1, num_perms, rng)
    c = counts.astype(np.float64)
    moments = NullMoments(float(c.mean()), float(c.var()), method, int(c.size))
    w = fr_statistic(r_obs, moments) if moments.var > 0 else 0.0
    if mode is PValueMode.NORMAL:
        p = fr_p_value_normal(w)
    else:
        hits = int(np.count_nonzero(counts <= r_obs))
        p = hits / c.size if method is MomentMethod.EXHAUSTIVE else (1 + hits) / (1 + c.size)
    return FRResult(r_n=r_obs, w_n=float(w), p_value=float(p), moments=moments)
