import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labeltest.core import Budget, BudgetExceedsPool, Outcome, UnlabeledPool
from labeltest.predictors import KNN, Partition
from labeltest.sequential import (
    BadProbability,
    EmptyCell,
    KnownPriorState,
    PartitionSpec,
    SequentialConfig,
    SequentialState,
    StateFrozen,
    Status,
    mi_partition_estimate,
    run_baseline_sequential,
    run_bqast,
    run_partition_example,
    step_estimated_prior,
    step_known_prior,
    xlogx_over_n,
)
from labeltest.synthetic import DiscreteAtoms, NullIdentical, SyntheticSpec, TwoGaussians, generate
from stubs import Lookup, index_pool


def _run(state, zs, qs):
    for z, q in zip(zs, qs):
        state.step(z, q)
    return state


@pytest.mark.parametrize(
    "zs, qs, u",
    [((0, 1), (0.5, 0.5), 1.0), ((1,), (0.5,), 2.0), ((1, 1, 1), (0.5, 0.5, 0.5), 8.0)],
)
def test_estimated_prior_examples(zs, qs, u):
    assert math.exp(_run(SequentialState(), zs, qs).log_u) == pytest.approx(u)


def test_estimated_prior_is_not_a_running_product():
    s = SequentialState()
    step_estimated_prior(s, 1, 0.5)
    step_estimated_prior(s, 0, 0.5)
    # step 1 alone gives u = 2; after a balanced pair the MLE prior drops back to 1/2
    assert s.log_u == pytest.approx(0.0)
    assert s.count_one == 1 and s.n == 2


def test_known_prior_uninformative():
    s = KnownPriorState(prior1=0.3)
    rng = np.random.default_rng(0)
    for z in rng.integers(0, 2, 50):
        step_known_prior(s, int(z), 0.3 if z == 1 else 0.7)
        assert s.log_t == pytest.approx(0.0, abs=1e-12)


def test_known_prior_arithmetic():
    s = KnownPriorState(prior1=0.5)
    prev = 0.0
    for n in range(1, 6):
        step_known_prior(s, 1, 0.999)
        assert s.log_t == pytest.approx(n * math.log(0.5 / 0.999))
        assert s.log_t < prev
        prev = s.log_t
    before = s.log_t
    step_known_prior(s, 0, 0.25)
    assert s.log_t - before == pytest.approx(math.log(2.0))


@pytest.mark.parametrize("q", [0.0, 1.0, -0.1, float("nan")])
def test_bad_probability(q):
    with pytest.raises(BadProbability):
        SequentialState().step(1, q)
    with pytest.raises(BadProbability):
        KnownPriorState(0.5).step(1, q)


def test_bad_prior():
    with pytest.raises(BadProbability):
        KnownPriorState(prior1=1.0)


def test_frozen_after_reject():
    s = SequentialState().step(1, 0.9)
    s.reject()
    assert s.status is Status.REJECTED and s.stop_step == 1
    with pytest.raises(StateFrozen):
        s.step(0, 0.5)
    t = KnownPriorState(0.5).step(1, 0.9)
    t.reject()
    with pytest.raises(StateFrozen):
        t.step(0, 0.5)


def test_xlogx_conventions():
    assert xlogx_over_n(0, 5) == 0.0
    assert xlogx_over_n(5, 5) == 0.0
    assert xlogx_over_n(1, 2) == pytest.approx(2 * math.log(0.5))


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 60), data=st.data())
def test_mle_beats_every_prior(n, data):
    k = data.draw(st.integers(0, n))
    best = xlogx_over_n(k, n)
    for theta in np.linspace(0.001, 0.999, 199):
        assert best >= k * math.log(theta) + (n - k) * math.log(1 - theta) - 1e-9


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 80),
    prior1=st.floats(0.01, 0.99),
)
def test_u_dominates_t(seed, n, prior1):
    rng = np.random.default_rng(seed)
    u, t = SequentialState(), KnownPriorState(prior1)
    for z, q in zip(rng.integers(0, 2, n), rng.uniform(0.001, 0.999, n)):
        u.step(int(z), float(q))
        t.step(int(z), float(q))
        assert u.log_u >= t.log_t - 1e-9


def _gauss_pool(seed, sep=4.0, n=800):
    spec = SyntheticSpec(TwoGaussians(d=1, mu0=(0.0,), mu1=(sep,)), n=n)
    return generate(spec, np.random.default_rng(seed))


def test_bqast_rejects_separated():
    cfg = SequentialConfig(Budget(20, 300))
    res = run_bqast(_gauss_pool(0), cfg, np.random.default_rng(0))
    assert res.decision.outcome is Outcome.REJECT
    assert res.state.status is Status.REJECTED
    assert res.trajectory[-1] <= math.log(cfg.alpha)
    assert res.decision.labels_used == 20 + res.decision.stop_step


def test_prequential_honesty():
    cfg = SequentialConfig(Budget(15, 120), stop_at_rejection=False)
    for runner in (run_bqast, run_baseline_sequential):
        res = runner(_gauss_pool(1), cfg, np.random.default_rng(1))
        assert res.train_sizes == [15 + i for i in range(105)]
        assert len(res.trajectory) == 105 == res.state.n


def test_exhausted_retains():
    pool = generate(SyntheticSpec(NullIdentical(1), n=100), np.random.default_rng(2))
    res = run_bqast(pool, SequentialConfig(Budget(10, 30), alpha=1e-9), np.random.default_rng(0))
    assert res.decision.outcome is Outcome.RETAIN
    assert res.state.status is Status.EXHAUSTED
    assert len(res.trajectory) == 20 and pool.n_queries == 30


def test_budget_after_init():
    pool = _gauss_pool(3)
    cfg = SequentialConfig(Budget(10, 30), alpha=1e-9, budget_includes_init=False)
    res = run_bqast(pool, cfg, np.random.default_rng(0))
    assert len(res.trajectory) == 30 and pool.n_queries == 40


def test_pool_exhaustion_ends_run():
    pool = _gauss_pool(4, n=25)
    cfg = SequentialConfig(Budget(10, 25), alpha=1e-12, budget_includes_init=False)
    res = run_bqast(pool, cfg, np.random.default_rng(0))
    assert res.state.n == 15 and res.state.status is Status.EXHAUSTED


def test_budget_exceeds_pool():
    with pytest.raises(BudgetExceedsPool):
        run_bqast(_gauss_pool(0, n=20), SequentialConfig(Budget(5, 50)), np.random.default_rng(0))


def test_baseline_deterministic():
    cfg = SequentialConfig(Budget(10, 80), stop_at_rejection=False)
    a = run_baseline_sequential(_gauss_pool(5), cfg, np.random.default_rng(9))
    b = run_baseline_sequential(_gauss_pool(5), cfg, np.random.default_rng(9))
    assert a.trajectory == b.trajectory
    assert [h[0] for h in a.state.history] == [h[0] for h in b.state.history]


def test_result_unpacks():
    decision, state, traj = run_bqast(_gauss_pool(6), SequentialConfig(Budget(10, 50)), np.random.default_rng(0))
    assert state.n == len(traj)


def test_first_crossing_independent_of_stop_flag():
    base = dict(budget=Budget(20, 300))
    a = run_bqast(_gauss_pool(7), SequentialConfig(**base), np.random.default_rng(4))
    b = run_bqast(_gauss_pool(7), SequentialConfig(**base, stop_at_rejection=False), np.random.default_rng(4))
    assert a.first_crossing == b.first_crossing
    assert a.trajectory == b.trajectory[: len(a.trajectory)]


@pytest.mark.slow
def test_bqast_power_separated():
    rng = np.random.default_rng(31)
    cfg = SequentialConfig(Budget(20, 300))
    spec = SyntheticSpec(TwoGaussians(d=1, mu0=(0.0,), mu1=(4.0,)), n=800)
    hits = sum(run_bqast(generate(spec, rng), cfg, rng).decision.outcome is Outcome.REJECT for _ in range(200))
    assert hits / 200 >= 0.9


@pytest.mark.slow
def test_baseline_h0_flat_predictor():
    rng = np.random.default_rng(8)
    cfg = SequentialConfig(Budget(20, 200), predictor_kind=Partition(bins=1), stop_at_rejection=False)
    spec = SyntheticSpec(NullIdentical(2), n=400)
    trials = 300
    rejections = 0
    finals = []
    for _ in range(trials):
        res = run_baseline_sequential(generate(spec, rng), cfg, rng)
        rejections += res.first_crossing is not None
        finals.append(res.trajectory[-1])
    assert rejections / trials <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / trials)
    # a plug-in predictor pays only a logarithmic regret against the fitted prior
    assert 0.0 < np.mean(finals) < math.log(180)


# -- partition example -------------------------------------------------------


def test_mi_estimate_flat():
    pool = index_pool(4)
    assert mi_partition_estimate(Lookup([0.5] * 4), pool, np.ones(4, bool), 0.5) == pytest.approx(0.0)


def test_mi_estimate_deterministic_clipped():
    pool = index_pool(4)
    pred = Lookup([1.0, 0.0, 1.0, 0.0], clip_eps=1e-3)
    got = mi_partition_estimate(pred, pool, ((-1.0,), (10.0,)), 0.5)
    want = math.log(2) + 0.999 * math.log(0.999) + 0.001 * math.log(0.001)
    assert got == pytest.approx(want)
    assert got == pytest.approx(0.685, abs=1e-3)


def test_mi_estimate_errors():
    pool = index_pool(4)
    with pytest.raises(ValueError):
        mi_partition_estimate(Lookup([0.5] * 4), pool, np.ones(4, bool), 1.0)
    with pytest.raises(EmptyCell):
        mi_partition_estimate(Lookup([0.5] * 4), pool, ((20.0,), (30.0,)), 0.5)


def test_partition_spec_assign():
    spec = PartitionSpec.slabs([0.0, 1.0, 2.0], [0.5, 0.5])
    np.testing.assert_array_equal(spec.assign(np.array([[0.0], [1.0], [1.5], [3.0]])), [0, 0, 1, -1])
    with pytest.raises(ValueError):
        PartitionSpec.slabs([0.0, 1.0], [0.0])


def _atom_pool(seed, posterior1):
    kind = DiscreteAtoms(atoms=((0.0,), (2.0,), (3.0,)), mass=(0.5, 0.25, 0.25), posterior1=posterior1)
    return generate(SyntheticSpec(kind, n=2000), np.random.default_rng(seed))


def test_partition_picks_informative_cell():
    pool = _atom_pool(0, (0.5, 0.1, 0.9))
    spec = PartitionSpec.slabs([-1.0, 1.0, 4.0], [0.5, 0.5])
    cfg = SequentialConfig(Budget(300, 500), predictor_kind=Partition(bins=8))
    res = run_partition_example(pool, spec, cfg, np.random.default_rng(0))
    assert res.chosen_cell == 1
    assert res.mi_estimates[1] > res.mi_estimates[0]
    assert res.decision.outcome is Outcome.REJECT


def test_partition_tie_goes_to_first_cell():
    pool = _atom_pool(1, (0.5, 0.5, 0.5))
    spec = PartitionSpec.slabs([-1.0, 1.0, 4.0], [0.5, 0.5])
    pred_kind = Partition(bins=1)
    res = run_partition_example(pool, spec, SequentialConfig(Budget(50, 100), predictor_kind=pred_kind), np.random.default_rng(0))
    assert res.mi_estimates[0] == pytest.approx(res.mi_estimates[1], abs=1e-12)
    assert res.chosen_cell == 0


def test_partition_frozen_predictor_and_cell_sampling():
    pool = _atom_pool(2, (0.5, 0.1, 0.9))
    spec = PartitionSpec.slabs([-1.0, 1.0, 4.0], [0.5, 0.5])
    cfg = SequentialConfig(Budget(100, 300), predictor_kind=Partition(bins=8), stop_at_rejection=False)
    res = run_partition_example(pool, spec, cfg, np.random.default_rng(0))
    in_cell = spec.assign(pool.features) == res.chosen_cell
    assert all(in_cell[i] for i, _, _ in res.state.history)
    assert len(res.trajectory) == 200


def test_partition_empty_cell():
    pool = _atom_pool(3, (0.5, 0.1, 0.9))
    spec = PartitionSpec.slabs([-1.0, 1.0, 4.0, 9.0], [0.5, 0.5, 0.5])
    with pytest.raises(EmptyCell):
        run_partition_example(pool, spec, SequentialConfig(Budget(10, 20)), np.random.default_rng(0))
