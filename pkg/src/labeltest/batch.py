"""Three-stage batch test: uniform labels to train Q, bimodal top-k labels, FR test on everything labeled."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from labeltest.core import (
    Budget,
    Decision,
    LabeledSet,
    Outcome,
    PoolExhausted,
    UnlabeledPool,
    check_alpha,
)
from labeltest.graph_fr import MIN_PERMUTATIONS, FRResult, PValueMode, fr_test
from labeltest.predictors import DEFAULT_CLIP_EPS, KNN, Predictor, PredictorKind, fit, with_pool_box
from labeltest.query import pool_posterior1, uniform_sample


@dataclass(frozen=True)
class BatchConfig:
    budget: Budget
    alpha: float = 0.05
    predictor_kind: PredictorKind = field(default_factory=KNN)
    permutations: int = 1000
    p_value_mode: PValueMode = PValueMode.PERMUTATION
    clip_eps: float = DEFAULT_CLIP_EPS

    def __post_init__(self):
        check_alpha(self.alpha)
        object.__setattr__(self, "p_value_mode", PValueMode(self.p_value_mode))
        if self.permutations < MIN_PERMUTATIONS:
            raise ValueError(f"permutations must be >= {MIN_PERMUTATIONS}")


@dataclass
class BatchReport:
    decision: Decision
    fr: FRResult | None
    stage1_indices: list[int]
    stage2_indices: list[int]
    class_counts: tuple[int, int]
    degenerate: bool = False
    predictor_updates: int = 0

    @property
    def p_value(self) -> float:
        return 1.0 if self.fr is None else self.fr.p_value


def _top_by(score: np.ndarray, available: np.ndarray, k: int) -> np.ndarray:
    idx = np.flatnonzero(available)
    # descending score, ascending index on ties
    order = np.lexsort((idx, -score[idx]))
    return idx[order[:k]]


def stage2_topk(pool: UnlabeledPool, pred: Predictor, k0: int, k1: int) -> tuple[list[int], list[int]]:
    """Top-k0 unqueried points by Q(0|s), then top-k1 of the remainder by Q(1|s)."""
    if k0 < 0 or k1 < 0 or k0 + k1 > pool.n_unqueried:
        raise PoolExhausted(f"cannot select {k0}+{k1} from {pool.n_unqueried} unqueried points")
    q1 = pool_posterior1(pool, pred)
    available = ~pool.queried
    idx0 = _top_by(1.0 - q1, available, k0)
    available = available.copy()
    available[idx0] = False
    idx1 = _top_by(q1, available, k1)
    return idx0.tolist(), idx1.tolist()


def run_batch(pool: UnlabeledPool, cfg: BatchConfig, rng: np.random.Generator) -> BatchReport:
    cfg.budget.check(pool)
    n0, nq = cfg.budget.n_init, cfg.budget.n_total

    stage1 = [c.index for c in uniform_sample(pool, rng, n0)]
    z1 = [pool.query(i) for i in stage1]
    kind = with_pool_box(cfg.predictor_kind, pool.features)
    pred = fit(kind, LabeledSet(pool.features[stage1], z1), cfg.clip_eps)

    half = (nq - n0) // 2
    idx0, idx1 = stage2_topk(pool, pred, half, nq - n0 - half)
    stage2 = idx0 + idx1
    z2 = [pool.query(i) for i in stage2]

    queried = stage1 + stage2
    labels = np.asarray(z1 + z2, dtype=np.int8)
    n1 = int(labels.sum())
    counts = (len(queried) - n1, n1)
    if n1 == 0 or n1 == len(queried):
        return BatchReport(
            Decision(Outcome.RETAIN, pool.n_queries),
            None,
            stage1,
            stage2,
            counts,
            degenerate=True,
            predictor_updates=pred.n_updates,
        )
    fr = fr_test(
        pool.features[queried],
        labels,
        mode=cfg.p_value_mode,
        num_perms=cfg.permutations,
        rng=rng,
    )
    outcome = Outcome.REJECT if fr.p_value < cfg.alpha else Outcome.RETAIN
    return BatchReport(
        Decision(outcome, pool.n_queries),
        fr,
        stage1,
        stage2,
        counts,
        predictor_updates=pred.n_updates,
    )


def run_uniform_fr(pool: UnlabeledPool, cfg: BatchConfig, rng: np.random.Generator) -> BatchReport:
    """Plain FR test on ``n_total`` uniformly sampled labels (no classifier, no bimodal stage)."""
    cfg.budget.check(pool)
    chosen = [c.index for c in uniform_sample(pool, rng, cfg.budget.n_total)]
    labels = np.asarray([pool.query(i) for i in chosen], dtype=np.int8)
    n1 = int(labels.sum())
    counts = (len(chosen) - n1, n1)
    if n1 == 0 or n1 == len(chosen):
        return BatchReport(Decision(Outcome.RETAIN, pool.n_queries), None, chosen, [], counts, True)
    fr = fr_test(pool.features[chosen], labels, mode=cfg.p_value_mode, num_perms=cfg.permutations, rng=rng)
    outcome = Outcome.REJECT if fr.p_value < cfg.alpha else Outcome.RETAIN
    return BatchReport(Decision(outcome, pool.n_queries), fr, chosen, [], counts)
