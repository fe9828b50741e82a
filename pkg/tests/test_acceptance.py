"""Acceptance criteria, one test each, at their stated tolerances.

Every test prints one ``ACCEPTANCE <n> ... PASS|FAIL`` line before asserting;
the lines are repeated in the terminal summary. Run alone with
``pytest tests/test_acceptance.py -v``.
"""

import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import stats

from labeltest.core import Budget, Outcome, UnlabeledPool
from labeltest.diagnostics import (
    DensityPair,
    GridIntegrator,
    PowerBoundInputs,
    gaussian_box,
    gaussian_density,
    henze_limit,
    joint_table,
    mutual_information,
    power_lower_bounds,
)
from labeltest.graph_fr import cut_edge_count, euclidean_mst, null_cut_counts
from labeltest.harness import config_from_dict, run_experiment, trial_rng, wilson_interval
from labeltest.predictors import Kernel, Partition
from labeltest.query import lp_objective, optimal_density_discrete
from labeltest.sequential import (
    KnownPriorState,
    SequentialConfig,
    SequentialState,
    run_baseline_sequential,
    run_bqast,
)
from labeltest.synthetic import (
    DiscreteAtoms,
    GaussianVsMixture,
    MixtureComponent,
    NullIdentical,
    SyntheticSpec,
    generate,
    sample,
)
from oracles import brute_mst_weight, lp_grid_minimum

RESULTS: list[str] = []

pytestmark = pytest.mark.acceptance


def report(n: int, name: str, passed: bool, detail: str) -> None:
    line = f"ACCEPTANCE {n:>2} {name}: {'PASS' if passed else 'FAIL'} ({detail})"
    RESULTS.append(line)
    print(line)
    assert passed, line


def test_01_batch_type_one_error():
    cfg = config_from_dict(
        {
            "test": "batch",
            "n_total": 100,
            "n_init": 20,
            "alpha": 0.05,
            "trials": 1000,
            "seed": 20261015,
            "permutations": 1000,
            "p_value_mode": "permutation",
            "data": {"kind": "null", "d": 2, "n": 400},
        }
    )
    rep = run_experiment(cfg)
    lo, hi = rep.wilson_ci95
    ok = rep.n_errors == 0 and rep.rejection_rate <= 0.05 and hi <= 0.08
    report(1, "batch Type I", ok, f"rate={rep.rejection_rate:.4f}, wilson95=[{lo:.4f}, {hi:.4f}], {rep.wall_time:.0f}s")


def test_02_sequential_anytime_validity():
    trials = 2000
    spec = SyntheticSpec(NullIdentical(d=1), n=1000)
    # the path up to the first crossing does not depend on alpha, so one
    # unstopped run per trial answers both levels
    cfg = SequentialConfig(Budget(100, 500), alpha=0.05, stop_at_rejection=False)
    minima = np.empty(trials)
    for t in range(trials):
        rng = trial_rng(777, t)
        minima[t] = run_bqast(generate(spec, rng), cfg, rng).min_log_stat
    parts, ok = [], True
    for a in (0.01, 0.05):
        rate = float(np.mean(minima <= math.log(a)))
        bound = a + 3 * math.sqrt(a * (1 - a) / trials)
        ok &= rate <= bound
        parts.append(f"alpha={a}: P(exists n, u_n<=alpha)={rate:.4f} <= {bound:.4f}")
    report(2, "anytime validity", ok, "; ".join(parts))


def test_03_fr_normal_approximation():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(200, 2))
    mst = euclidean_mst(pts)
    counts, _ = null_cut_counts(mst, 100, 100, 10_000, rng)
    w = (counts - counts.mean()) / counts.std()
    ks = stats.kstest(w, "norm").statistic
    report(3, "FR normal approximation", ks <= 0.1, f"KS={ks:.4f} <= 0.1")


def test_04_henze_limit():
    rng = np.random.default_rng(4)
    n = 2000
    z = rng.integers(0, 2, n)
    x0 = rng.normal(size=(n, 2))
    r0 = cut_edge_count(euclidean_mst(x0), z) / n
    x1 = rng.normal(size=n) + 2.0 * z
    r1 = cut_edge_count(euclidean_mst(x1), z) / n
    px, py = gaussian_density([0.0]), gaussian_density([2.0])
    limit = henze_limit(DensityPair(px, py, 0.5), GridIntegrator(*gaussian_box([[0.0], [2.0]], 1.0)))
    quad, _ = sp_integrate.quad(
        lambda s: stats.norm.pdf(s) * stats.norm.pdf(s, 2) / (0.5 * stats.norm.pdf(s) + 0.5 * stats.norm.pdf(s, 2)),
        -12,
        14,
    )
    ok = abs(r0 - 0.5) <= 0.05 and abs(r1 - limit) <= 0.05 and abs(limit - 0.5 * quad) < 1e-6
    report(4, "Henze limit", ok, f"H0 R/n={r0:.4f} vs 0.5; H1 R/n={r1:.4f} vs limit {limit:.4f}")


def test_05_negative_mi_convergence():
    posterior1 = (0.1, 0.5, 0.9)
    kind = DiscreteAtoms(atoms=((0.0,), (1.0,), (2.0,)), mass=(1 / 3, 1 / 3, 1 / 3), posterior1=posterior1)
    spec = SyntheticSpec(kind, n=9000)
    mi = mutual_information(joint_table([1 / 3] * 3, posterior1))
    # the bimodal limit puts half the queries on each extreme atom
    dens = optimal_density_discrete([0, 1, 2], [1 - p for p in posterior1], 0.5)
    mi_star = mutual_information(joint_table(dens.mass, posterior1))
    cfg = SequentialConfig(Budget(300, 2300), predictor_kind=Partition(bins=3), stop_at_rejection=False)
    rng = np.random.default_rng(5)
    means = {}
    for name, runner in (("uniform", run_baseline_sequential), ("bimodal", run_bqast)):
        vals = []
        for _ in range(30):
            res = runner(generate(spec, rng), cfg, rng)
            assert len(res.trajectory) == 2000
            vals.append(res.trajectory[-1] / 2000)
        means[name] = float(np.mean(vals))
    ok = (
        abs(means["uniform"] + mi) <= 0.1
        and abs(means["bimodal"] + mi_star) <= 0.1
        and -mi_star <= -mi
        and means["bimodal"] <= means["uniform"]
    )
    report(
        5,
        "negative-MI convergence",
        ok,
        f"uniform {means['uniform']:.4f} vs -I={-mi:.4f}; bimodal {means['bimodal']:.4f} vs -I*={-mi_star:.4f}",
    )


def test_06_dominance():
    rng = np.random.default_rng(6)
    violations = 0
    worst = math.inf
    for _ in range(10_000):
        n = int(rng.integers(1, 101))
        prior1 = float(rng.uniform(0.01, 0.99))
        zs = (rng.random(n) < rng.random()).astype(int)
        qs = rng.uniform(0.001, 0.999, n)
        u, t = SequentialState(), KnownPriorState(prior1)
        for z, q in zip(zs, qs):
            u.step(int(z), float(q))
            t.step(int(z), float(q))
            gap = u.log_u - t.log_t
            worst = min(worst, gap)
            # rounding slack only
            if gap < -1e-12 * (1.0 + abs(t.log_t)):
                violations += 1
    report(6, "dominance u_n >= t_n", violations == 0, f"violations={violations}, min log-gap={worst:.3e}")


def test_07_lp_optimality():
    rng = np.random.default_rng(7)
    violations = 0
    worst = -math.inf
    for _ in range(100):
        n = int(rng.integers(2, 7))
        p0 = rng.random(n)
        u = float(rng.uniform(p0.min(), p0.max()))
        dens = optimal_density_discrete(np.arange(n), p0, u)
        feasible = abs(math.fsum((dens.mass * p0).tolist()) - u) <= 1e-12
        gap = lp_objective(dens, p0) - lp_grid_minimum(p0, u, 0.02)
        worst = max(worst, gap)
        if not feasible or gap > 1e-9:
            violations += 1
    report(7, "LP optimality", violations == 0, f"violations={violations}, max(objective - grid min)={worst:.3e}")


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def test_08_power_bound_formulas():
    cases = []
    # n_q=100, alpha=0.05, I=0.1, no approximation error, sigma=1
    prop, base = power_lower_bounds(PowerBoundInputs(100, 0.05, 0.1, 0.0, 0.0, 0.0, 1.0))
    cases.append((prop, 0.758))
    cases.append((base, _phi(math.log(0.05) / 10 + 1.0)))
    # denominator sqrt(0.01 + 0.25 + 2 * 0.5 * 0.1) = 0.6
    prop, base = power_lower_bounds(PowerBoundInputs(400, 0.01, 0.02, 0.45, 0.01, 0.04, 0.5))
    head = math.log(0.01) / 20
    cases.append((prop, _phi((head + 20 * 0.07) / 0.6)))
    cases.append((base, _phi((head + 20 * (0.02 - 0.1)) / 0.6)))
    worst = max(abs(a - b) for a, b in cases)
    formulas_ok = worst <= 1e-3

    grid_rng = np.random.default_rng(8)
    violations = 0
    vals = np.linspace(0.0, 0.09, 10)
    for eps1 in vals:
        for eps2 in vals:
            for extra in np.linspace(0.0, 0.5, 10):
                inp = PowerBoundInputs(
                    n_q=int(grid_rng.integers(10, 2000)),
                    alpha=float(grid_rng.choice([0.01, 0.05, 0.1])),
                    mi=float(grid_rng.uniform(0.0, 0.5)),
                    delta=math.sqrt(eps1) + math.sqrt(eps2) + float(extra),
                    eps1=float(eps1),
                    eps2=float(eps2),
                    sigma=float(grid_rng.uniform(0.1, 2.0)),
                )
                p, b = power_lower_bounds(inp)
                if p < b - 1e-12:
                    violations += 1
    ok = formulas_ok and violations == 0
    report(8, "power bound formulas", ok, f"max |bound - hand value|={worst:.2e}; ordering violations={violations}/1000")


def test_09_power_ordering():
    trials = 500
    kind = GaussianVsMixture(
        d=2,
        components=(MixtureComponent(0.85, (0.0, 0.0), 1.0), MixtureComponent(0.15, (2.5, 2.5), 0.3)),
    )
    spec = SyntheticSpec(kind, n=1000)
    cfg = SequentialConfig(Budget(30, 150), predictor_kind=Kernel())
    bim = np.zeros(trials, dtype=bool)
    uni = np.zeros(trials, dtype=bool)
    for t in range(trials):
        rng = trial_rng(909, t)
        X, z = sample(spec, rng)
        bim[t] = run_bqast(UnlabeledPool(X, z), cfg, rng).decision.outcome is Outcome.REJECT
        uni[t] = run_baseline_sequential(UnlabeledPool(X, z), cfg, rng).decision.outcome is Outcome.REJECT
    diff = bim.astype(float) - uni.astype(float)
    mean = float(diff.mean())
    half = 1.96 * float(diff.std(ddof=1)) / math.sqrt(trials)
    ok = bim.mean() >= uni.mean() and mean + half >= 0
    lo_b, hi_b = wilson_interval(int(bim.sum()), trials)
    report(
        9,
        "power ordering",
        ok,
        f"BQ-AST {bim.mean():.3f} [{lo_b:.3f}, {hi_b:.3f}] vs baseline {uni.mean():.3f}; "
        f"diff 95% CI [{mean - half:.3f}, {mean + half:.3f}]",
    )


def test_10_mst_oracle():
    rng = np.random.default_rng(10)
    mismatches = 0
    for i in range(200):
        n = int(rng.integers(2, 8))
        d = int(rng.integers(1, 4))
        # every other set sits on a small lattice to force distance ties
        pts = rng.integers(0, 3, (n, d)).astype(float) if i % 2 else rng.normal(size=(n, d))
        if euclidean_mst(pts).total_weight != brute_mst_weight(pts):
            mismatches += 1
    report(10, "MST oracle", mismatches == 0, f"mismatches={mismatches}/200")
