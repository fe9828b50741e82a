"""Anytime-valid sequential tests driven by a class-probability predictor.

Statistics are kept in the log domain:

* known prior:     log t_n = sum log P(z_i) - sum log Q_i(z_i | s_i)
* estimated prior: log u_n = k log(k/n) + (n-k) log((n-k)/n) - sum log Q_i(z_i | s_i)

with k the number of ones among z_1..z_n and 0 log 0 = 0. H0 is rejected the
first time the statistic drops to log(alpha) or below.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from labeltest.core import (
    Budget,
    Decision,
    LabeledSet,
    LabelTestError,
    Outcome,
    UnlabeledPool,
    check_alpha,
)
from labeltest.predictors import DEFAULT_CLIP_EPS, KNN, Predictor, PredictorKind, fit, with_pool_box
from labeltest.query import bimodal_single_from_scores, uniform_sample


class BadProbability(LabelTestError, ValueError):
    pass


class StateFrozen(LabelTestError):
    """Raised when stepping a state that already rejected H0."""


class EmptyCell(LabelTestError, ValueError):
    pass


class Status(str, enum.Enum):
    RUNNING = "Running"
    REJECTED = "Rejected"
    EXHAUSTED = "Exhausted"


def _check_q(q: float) -> float:
    q = float(q)
    if not (0.0 < q < 1.0):
        raise BadProbability(f"predicted probability must lie in (0, 1), got {q}")
    return q


def _check_z(z: int) -> int:
    z = int(z)
    if z not in (0, 1):
        raise ValueError("label must be 0 or 1")
    return z


def xlogx_over_n(k: int, n: int) -> float:
    """k log(k/n) + (n-k) log((n-k)/n), the maximized log-likelihood of a Bernoulli sequence."""
    out = 0.0
    if k > 0:
        out += k * math.log(k / n)
    if n - k > 0:
        out += (n - k) * math.log((n - k) / n)
    return out


@dataclass
class SequentialState:
    n: int = 0
    sum_log_q: float = 0.0
    count_one: int = 0
    log_u: float = 0.0
    history: list[tuple[int, int, float]] = field(default_factory=list)
    status: Status = Status.RUNNING
    stop_step: int | None = None

    def step(self, z: int, q_z: float, index: int = -1) -> "SequentialState":
        if self.status is Status.REJECTED:
            raise StateFrozen(f"state rejected H0 at step {self.stop_step}")
        z = _check_z(z)
        q_z = _check_q(q_z)
        self.n += 1
        self.count_one += z
        self.sum_log_q += math.log(q_z)
        # the prior MLE is refit on the whole sequence, so this is not a running product
        self.log_u = xlogx_over_n(self.count_one, self.n) - self.sum_log_q
        self.history.append((int(index), z, q_z))
        return self

    def reject(self) -> None:
        self.status = Status.REJECTED
        self.stop_step = self.n


def step_estimated_prior(state: SequentialState, z: int, q_z: float, index: int = -1) -> SequentialState:
    return state.step(z, q_z, index)


@dataclass
class KnownPriorState:
    prior1: float
    n: int = 0
    log_t: float = 0.0
    history: list[tuple[int, int, float]] = field(default_factory=list)
    status: Status = Status.RUNNING
    stop_step: int | None = None

    def __post_init__(self):
        if not 0.0 < self.prior1 < 1.0:
            raise BadProbability(f"prior must lie in (0, 1), got {self.prior1}")

    def step(self, z: int, q_z: float, index: int = -1) -> "KnownPriorState":
        if self.status is Status.REJECTED:
            raise StateFrozen(f"state rejected H0 at step {self.stop_step}")
        z = _check_z(z)
        q_z = _check_q(q_z)
        p = self.prior1 if z == 1 else 1.0 - self.prior1
        self.log_t += math.log(p) - math.log(q_z)
        self.n += 1
        self.history.append((int(index), z, q_z))
        return self

    def reject(self) -> None:
        self.status = Status.REJECTED
        self.stop_step = self.n


def step_known_prior(state: KnownPriorState, z: int, q_z: float, index: int = -1) -> KnownPriorState:
    return state.step(z, q_z, index)


@dataclass(frozen=True)
class SequentialConfig:
    budget: Budget
    alpha: float = 0.05
    predictor_kind: PredictorKind = field(default_factory=KNN)
    clip_eps: float = DEFAULT_CLIP_EPS
    # Algorithm-style accounting: the n_init labels count against n_total
    budget_includes_init: bool = True
    # keep querying after the first crossing (analysis only; the decision is unchanged)
    stop_at_rejection: bool = True

    def __post_init__(self):
        check_alpha(self.alpha)

    @property
    def n_steps(self) -> int:
        b = self.budget
        return b.n_total - b.n_init if self.budget_includes_init else b.n_total


@dataclass
class SequentialResult:
    decision: Decision
    state: SequentialState | KnownPriorState
    trajectory: list[float]
    # training-set size of the predictor at each step's prediction
    train_sizes: list[int]
    first_crossing: int | None = None
    predictor: Predictor | None = None

    def __iter__(self):
        return iter((self.decision, self.state, self.trajectory))

    @property
    def min_log_stat(self) -> float:
        return min(self.trajectory) if self.trajectory else 0.0


def _initialize(pool: UnlabeledPool, cfg: SequentialConfig, rng: np.random.Generator) -> Predictor:
    cfg.budget.check(pool)
    init = [c.index for c in uniform_sample(pool, rng, cfg.budget.n_init)]
    z = [pool.query(i) for i in init]
    kind = with_pool_box(cfg.predictor_kind, pool.features)
    return fit(kind, LabeledSet(pool.features[init], z), cfg.clip_eps)


Selector = Callable[[UnlabeledPool, Predictor, np.random.Generator], tuple[int, float]]


def _select_bimodal(pool: UnlabeledPool, pred: Predictor, rng: np.random.Generator) -> tuple[int, float]:
    q1 = pred.predict_attached()
    choice = bimodal_single_from_scores(q1, ~pool.queried, rng)
    return choice.index, float(q1[choice.index])


def _select_uniform(pool: UnlabeledPool, pred: Predictor, rng: np.random.Generator) -> tuple[int, float]:
    idx = uniform_sample(pool, rng, 1)[0].index
    return idx, float(pred.predict_proba1(pool.features[idx : idx + 1])[0])


def _sequential_loop(
    pool: UnlabeledPool,
    cfg: SequentialConfig,
    rng: np.random.Generator,
    select: Selector,
    attach: bool,
) -> SequentialResult:
    pred = _initialize(pool, cfg, rng)
    if attach:
        pred.attach(pool.features)
        for i in np.flatnonzero(pool.queried):
            pred.detach_row(int(i))
    log_alpha = math.log(cfg.alpha)
    state = SequentialState()
    trajectory: list[float] = []
    train_sizes: list[int] = []
    first = None
    for _ in range(cfg.n_steps):
        if pool.n_unqueried == 0:
            break
        idx, q1 = select(pool, pred, rng)
        train_sizes.append(len(pred))
        z = pool.query(idx)
        pred.detach_row(idx)
        state.step(z, q1 if z == 1 else 1.0 - q1, idx)
        trajectory.append(state.log_u)
        if first is None and state.log_u <= log_alpha:
            first = state.n
            if cfg.stop_at_rejection:
                state.reject()
                break
        pred.update(pool.features[idx], z)
    if first is not None:
        decision = Decision(Outcome.REJECT, pool.n_queries, first)
    else:
        state.status = Status.EXHAUSTED
        decision = Decision(Outcome.RETAIN, pool.n_queries)
    return SequentialResult(decision, state, trajectory, train_sizes, first, pred)


def run_bqast(pool: UnlabeledPool, cfg: SequentialConfig, rng: np.random.Generator) -> SequentialResult:
    """Bimodal-query active sequential test with the estimated-prior statistic.

    The n_init initialization labels train the predictor only and do not enter
    the statistic. Each later label is scored by the predictor trained on all
    earlier labels, then added to it.
    """
    return _sequential_loop(pool, cfg, rng, _select_bimodal, attach=True)


def run_baseline_sequential(pool: UnlabeledPool, cfg: SequentialConfig, rng: np.random.Generator) -> SequentialResult:
    """Same test, but each label is queried for a uniformly drawn unqueried point."""
    return _sequential_loop(pool, cfg, rng, _select_uniform, attach=False)


# -- partition example -------------------------------------------------------


@dataclass(frozen=True)
class PartitionSpec:
    """Axis-aligned boxes ``(lo, hi)`` and the class-0 prior inside each."""

    cells: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]
    priors0: tuple[float, ...]

    def __post_init__(self):
        if len(self.cells) != len(self.priors0) or not self.cells:
            raise ValueError("need one prior per cell and at least one cell")
        for p in self.priors0:
            if not 0.0 < p < 1.0:
                raise ValueError(f"cell priors must lie in (0, 1), got {p}")

    def assign(self, features: np.ndarray) -> np.ndarray:
        """Index of the first cell containing each point (boxes are closed); -1 if none."""
        out = np.full(features.shape[0], -1, dtype=np.int64)
        for c in range(len(self.cells) - 1, -1, -1):
            lo, hi = (np.asarray(b, dtype=np.float64) for b in self.cells[c])
            inside = np.all((features >= lo) & (features <= hi), axis=1)
            out[inside] = c
        return out

    @classmethod
    def slabs(cls, edges, priors0, axis: int = 0, dim: int = 1) -> "PartitionSpec":
        """Cells cut along one axis at ``edges`` (unbounded along the other axes)."""
        edges = [float(e) for e in edges]
        cells = []
        for a, b in zip(edges[:-1], edges[1:]):
            lo = [-math.inf] * dim
            hi = [math.inf] * dim
            lo[axis], hi[axis] = a, b
            cells.append((tuple(lo), tuple(hi)))
        return cls(tuple(cells), tuple(float(p) for p in priors0))


def binary_entropy(p0: float) -> float:
    if p0 in (0.0, 1.0):
        return 0.0
    return -(p0 * math.log(p0) + (1 - p0) * math.log(1 - p0))


def mi_partition_estimate(pred: Predictor, pool: UnlabeledPool, cell, prior0: float) -> float:
    """Plug-in estimate of I(S; Z | A) from the cell prior and the predictor's mean entropy.

    ``cell`` is a ``(lo, hi)`` box or a boolean mask over the pool.
    """
    if not 0.0 < prior0 < 1.0:
        raise ValueError(f"prior0 must lie in (0, 1), got {prior0}")
    if isinstance(cell, np.ndarray) and cell.dtype == bool:
        inside = cell
    else:
        lo, hi = (np.asarray(b, dtype=np.float64) for b in cell)
        inside = np.all((pool.features >= lo) & (pool.features <= hi), axis=1)
    idx = np.flatnonzero(inside & ~pool.queried)
    if idx.size == 0:
        raise EmptyCell("no unqueried pool points in the cell")
    q1 = pred.predict_proba1(pool.features[idx])
    q0 = 1.0 - q1
    neg_entropy = np.mean(q0 * np.log(q0) + q1 * np.log(q1))
    return binary_entropy(prior0) + float(neg_entropy)


@dataclass
class PartitionResult:
    decision: Decision
    chosen_cell: int
    state: KnownPriorState
    trajectory: list[float]
    mi_estimates: list[float]


def run_partition_example(
    pool: UnlabeledPool,
    spec: PartitionSpec,
    cfg: SequentialConfig,
    rng: np.random.Generator,
) -> PartitionResult:
    """Pick the cell with the largest estimated MI, then test with uniform labels from that cell.

    Uses the known-prior statistic with the cell's prior and a predictor frozen
    after initialization. Cells are 0-indexed; ties go to the lowest index.
    """
    cells = spec.assign(pool.features)
    for c in range(len(spec.cells)):
        if not np.any(cells == c):
            raise EmptyCell(f"cell {c} contains no pool points")
    pred = _initialize(pool, cfg, rng)
    mi = []
    for c, p0 in enumerate(spec.priors0):
        mi.append(mi_partition_estimate(pred, pool, cells == c, p0))
    mi_arr = np.asarray(mi)
    # estimates equal up to rounding count as ties
    best = int(np.flatnonzero(mi_arr >= mi_arr.max() - 1e-12)[0])
    state = KnownPriorState(prior1=1.0 - spec.priors0[best])
    log_alpha = math.log(cfg.alpha)
    trajectory: list[float] = []
    first = None
    in_cell = cells == best
    for _ in range(cfg.n_steps):
        avail = np.flatnonzero(in_cell & ~pool.queried)
        if avail.size == 0:
            break
        idx = int(rng.choice(avail))
        q1 = float(pred.predict_proba1(pool.features[idx : idx + 1])[0])
        z = pool.query(idx)
        state.step(z, q1 if z == 1 else 1.0 - q1, idx)
        trajectory.append(state.log_t)
        if state.log_t <= log_alpha:
            first = state.n
            if cfg.stop_at_rejection:
                state.reject()
                break
    if first is not None:
        decision = Decision(Outcome.REJECT, pool.n_queries, first)
    else:
        state.status = Status.EXHAUSTED
        decision = Decision(Outcome.RETAIN, pool.n_queries)
    return PartitionResult(decision, best, state, trajectory, mi)
