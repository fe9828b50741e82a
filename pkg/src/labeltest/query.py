"""Label selection: uniform sampling, the bimodal query, and the optimal discrete query density.

All argmax selections break ties toward the lowest pool index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from labeltest.core import LabelTestError, LengthMismatch, PoolExhausted, UnlabeledPool
from labeltest.predictors import Predictor


class InfeasiblePrior(LabelTestError, ValueError):
    pass


class Side(str, enum.Enum):
    Q0_MAX = "Q0Max"
    Q1_MAX = "Q1Max"
    UNIFORM = "Uniform"


@dataclass(frozen=True)
class QueryChoice:
    index: int
    side: Side


def pool_posterior1(pool: UnlabeledPool, pred: Predictor) -> np.ndarray:
    """Q(1 | s) over the whole pool; queried entries are NaN."""
    q1 = np.full(pool.n, np.nan)
    idx = pool.unqueried_indices()
    if idx.size:
        q1[idx] = pred.predict_proba1(pool.features[idx])
    return q1


def _argmax_masked(values: np.ndarray, available: np.ndarray) -> int:
    v = np.where(available, values, -np.inf)
    return int(np.argmax(v))


def bimodal_pair_from_scores(q1: np.ndarray, available: np.ndarray) -> tuple[QueryChoice, QueryChoice]:
    if int(available.sum()) < 2:
        raise PoolExhausted("bimodal pair needs at least 2 unqueried points")
    q0 = 1.0 - q1
    i0 = _argmax_masked(q0, available)
    i1 = _argmax_masked(q1, available)
    if i0 == i1:
        rest = available.copy()
        rest[i0] = False
        # the shared winner keeps the side where its posterior is larger
        if q0[i0] >= q1[i0]:
            i1 = _argmax_masked(q1, rest)
        else:
            i0 = _argmax_masked(q0, rest)
    return QueryChoice(i0, Side.Q0_MAX), QueryChoice(i1, Side.Q1_MAX)


def bimodal_pair(pool: UnlabeledPool, pred: Predictor) -> tuple[QueryChoice, QueryChoice]:
    """Unqueried points maximizing Q(0|s) and Q(1|s); always two distinct indices."""
    if pool.n_unqueried < 2:
        raise PoolExhausted("bimodal pair needs at least 2 unqueried points")
    return bimodal_pair_from_scores(pool_posterior1(pool, pred), ~pool.queried)


def bimodal_single_from_scores(
    q1: np.ndarray, available: np.ndarray, rng: np.random.Generator
) -> QueryChoice:
    if not available.any():
        raise PoolExhausted("no unqueried points left")
    if rng.random() < 0.5:
        return QueryChoice(_argmax_masked(1.0 - q1, available), Side.Q0_MAX)
    return QueryChoice(_argmax_masked(q1, available), Side.Q1_MAX)


def bimodal_single(pool: UnlabeledPool, pred: Predictor, rng: np.random.Generator) -> QueryChoice:
    """Fair coin between the argmax of Q(0|s) (heads) and of Q(1|s) (tails)."""
    if pool.n_unqueried < 1:
        raise PoolExhausted("no unqueried points left")
    return bimodal_single_from_scores(pool_posterior1(pool, pred), ~pool.queried, rng)


def uniform_sample(pool: UnlabeledPool, rng: np.random.Generator, k: int) -> list[QueryChoice]:
    """k distinct unqueried indices, uniformly without replacement."""
    avail = pool.unqueried_indices()
    if k < 0 or k > avail.size:
        raise PoolExhausted(f"asked for {k} of {avail.size} unqueried points")
    if k == 0:
        return []
    chosen = rng.choice(avail, size=k, replace=False)
    return [QueryChoice(int(i), Side.UNIFORM) for i in chosen]


@dataclass(frozen=True)
class DiscreteQueryDensity:
    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=np.float64)
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
            raise ValueError("mass must be nonnegative and sum to 1")


def optimal_density_discrete(support, posterior0, u: float) -> DiscreteQueryDensity:
    """Minimizer of sum P0 P1 m subject to sum P0 m = u, sum m = 1, m >= 0.

    Mass sits on the first atom with the largest P(0|s) and the first atom
    with the largest P(1|s). When every posterior equals ``u`` all densities
    are optimal and the uniform one is returned.
    """
    p0 = np.asarray(posterior0, dtype=np.float64)
    support = np.asarray(support)
    if support.shape[0] != p0.shape[0]:
        raise LengthMismatch("support and posterior differ in length")
    if p0.size == 0 or np.any((p0 < 0) | (p0 > 1)):
        raise ValueError("posterior0 values must lie in [0, 1]")
    i_hi = int(np.argmax(p0))
    i_lo = int(np.argmax(1.0 - p0))
    top, bottom = p0[i_hi], p0[i_lo]
    if not bottom <= u <= top:
        raise InfeasiblePrior(f"u={u} outside the attainable range [{bottom}, {top}]")
    mass = np.zeros(p0.size)
    if top == bottom:
        mass[:] = 1.0 / p0.size
        return DiscreteQueryDensity(support, mass)
    m_hi = (u - bottom) / (top - bottom)
    mass[i_hi] = m_hi
    mass[i_lo] = 1.0 - m_hi
    return DiscreteQueryDensity(support, mass)


def lp_objective(density: DiscreteQueryDensity, posterior0) -> float:
    p0 = np.asarray(posterior0, dtype=np.float64)
    m = np.asarray(density.mass, dtype=np.float64)
    if p0.shape != m.shape:
        raise LengthMismatch("density and posterior differ in length")
    return math.fsum((p0 * (1.0 - p0) * m).tolist())
