"""Monte Carlo experiments: config parsing, per-trial runs, aggregation and persistence."""

from __future__ import annotations

import csv
import enum
import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from labeltest.batch import BatchConfig, run_batch, run_uniform_fr
from labeltest.core import Budget, LabelTestError, UnlabeledPool, default_n_init
from labeltest.graph_fr import PValueMode
from labeltest.predictors import KNN, Kernel, Partition, PredictorKind
from labeltest.sequential import (
    PartitionSpec,
    SequentialConfig,
    run_baseline_sequential,
    run_bqast,
    run_partition_example,
)
from labeltest.synthetic import (
    DiscreteAtoms,
    GaussianVsMixture,
    MixtureComponent,
    NullIdentical,
    SyntheticSpec,
    TwoGaussians,
    sample,
)

log = logging.getLogger(__name__)

REFERENCE_DRAWS = 200_000


class ConfigError(LabelTestError, ValueError):
    pass


class TestKind(str, enum.Enum):
    BATCH_FR = "batch"
    BQAST = "bqast"
    BASELINE_SEQ = "baseline-seq"
    PARTITION = "partition"
    PLAIN_FR = "fr"

    __test__ = False


@dataclass(frozen=True)
class PredictorSettings:
    kind: str = "knn"
    k: int | None = None
    bandwidth: float | None = None
    bins: int = 8
    clip_eps: float = 1e-3

    def build(self) -> PredictorKind:
        if self.kind == "knn":
            return KNN(self.k)
        if self.kind == "kernel":
            return Kernel(self.bandwidth)
        if self.kind == "partition":
            return Partition(self.bins)
        raise ConfigError(f"unknown predictor kind {self.kind!r}")


@dataclass(frozen=True)
class PartitionSettings:
    """Slabs along ``axis`` cut at ``edges``; priors are estimated from the model when omitted."""

    edges: tuple[float, ...]
    axis: int = 0
    priors0: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    data: SyntheticSpec
    test: TestKind
    n_total: int
    n_init: int | None = None
    alpha: float = 0.05
    predictor: PredictorSettings = field(default_factory=PredictorSettings)
    trials: int = 100
    seed: int = 0
    permutations: int = 1000
    p_value_mode: str = "permutation"
    budget_includes_init: bool = True
    partition: PartitionSettings | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    @property
    def budget(self) -> Budget:
        n0 = default_n_init(self.n_total) if self.n_init is None else self.n_init
        return Budget(n0, self.n_total)

    def to_dict(self) -> dict[str, Any]:
        return config_to_dict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


# -- config (de)serialization ---------------------------------------------------------

_DATA_KINDS = {
    "null": NullIdentical,
    "two_gaussians": TwoGaussians,
    "gaussian_vs_mixture": GaussianVsMixture,
    "discrete_atoms": DiscreteAtoms,
}
_DATA_NAMES = {v: k for k, v in _DATA_KINDS.items()}


def _tuple(x):
    if isinstance(x, (list, tuple)):
        return tuple(_tuple(v) for v in x)
    return x


def _data_from_dict(d: dict) -> SyntheticSpec:
    d = dict(d)
    name = d.pop("kind", "null")
    if name not in _DATA_KINDS:
        raise ConfigError(f"unknown data kind {name!r}; expected one of {sorted(_DATA_KINDS)}")
    n = d.pop("n", 100)
    prior1 = d.pop("prior1", 0.5)
    if name == "gaussian_vs_mixture" and "components" in d:
        d["components"] = tuple(
            MixtureComponent(float(c["weight"]), _tuple(c["mean"]), float(c.get("sigma", 1.0)))
            for c in d["components"]
        )
    if name == "two_gaussians":
        dim = d.get("d", 1)
        d.setdefault("mu0", [0.0] * dim)
        d.setdefault("mu1", [1.0] * dim)
    d = {k: _tuple(v) for k, v in d.items()}
    try:
        kind = _DATA_KINDS[name](**d)
    except TypeError as exc:
        raise ConfigError(f"data: {exc}") from None
    return SyntheticSpec(kind, int(n), float(prior1))


def config_from_dict(raw: dict[str, Any], test: str | TestKind | None = None) -> ExperimentConfig:
    raw = dict(raw)
    try:
        kind = TestKind(test if test is not None else raw.get("test", "batch"))
    except ValueError:
        raise ConfigError(f"unknown test {raw.get('test')!r}") from None
    raw.pop("test", None)
    try:
        data = _data_from_dict(raw.pop("data", {}))
        pred = PredictorSettings(**raw.pop("predictor", {}))
        part = raw.pop("partition", None)
        if part is not None:
            part = PartitionSettings(
                edges=tuple(float(e) for e in part["edges"]),
                axis=int(part.get("axis", 0)),
                priors0=None if part.get("priors0") is None else tuple(float(p) for p in part["priors0"]),
            )
        if "n_total" not in raw:
            raise ConfigError("n_total is required")
        cfg = ExperimentConfig(data=data, test=kind, predictor=pred, partition=part, **raw)
        cfg.budget
        PValueMode(cfg.p_value_mode)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    spec = cfg.data
    data = {"kind": _DATA_NAMES[type(spec.kind)], "n": spec.n, "prior1": spec.prior1}
    data.update(asdict(spec.kind))
    out: dict[str, Any] = {
        "test": cfg.test.value,
        "n_total": cfg.n_total,
        "n_init": cfg.budget.n_init,
        "alpha": cfg.alpha,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "permutations": cfg.permutations,
        "p_value_mode": cfg.p_value_mode,
        "budget_includes_init": cfg.budget_includes_init,
        "data": _jsonable(data),
        "predictor": asdict(cfg.predictor),
    }
    if cfg.partition is not None:
        out["partition"] = _jsonable(asdict(cfg.partition))
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# -- running -------------------------------------------------------------------------


class CountingPool(UnlabeledPool):
    """Pool that independently counts oracle calls for label accounting."""

    def __init__(self, features, labels):
        super().__init__(features, labels)
        self.oracle_calls = 0

    def query(self, index: int) -> int:
        z = super().query(index)
        self.oracle_calls += 1
        return z


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def partition_spec(cfg: ExperimentConfig) -> PartitionSpec:
    if cfg.partition is None:
        raise ConfigError("the partition test needs a [partition] section")
    ps = cfg.partition
    if ps.priors0 is not None:
        priors0 = ps.priors0
    else:
        # per-cell priors from a fresh draw of the generating model (never from pool labels)
        X, z = sample(cfg.data, np.random.default_rng([cfg.seed, 2**32 - 1]), REFERENCE_DRAWS)
        spec = PartitionSpec.slabs(ps.edges, [0.5] * (len(ps.edges) - 1), ps.axis, cfg.data.kind.d)
        cells = spec.assign(X)
        priors0 = []
        for c in range(len(ps.edges) - 1):
            zc = z[cells == c]
            p0 = 1.0 - float(zc.mean()) if zc.size else 0.5
            priors0.append(min(max(p0, 1e-6), 1 - 1e-6))
    return PartitionSpec.slabs(ps.edges, priors0, ps.axis, cfg.data.kind.d)


def run_test_on_pool(cfg: ExperimentConfig, pool: UnlabeledPool, rng: np.random.Generator, pspec=None) -> dict:
    """One test run; returns a per-trial row (without trial number)."""
    row: dict[str, Any] = {"stop_step": None, "degenerate": False}
    predictor = cfg.predictor.build()
    if cfg.test in (TestKind.BATCH_FR, TestKind.PLAIN_FR):
        bcfg = BatchConfig(
            cfg.budget, cfg.alpha, predictor, cfg.permutations, PValueMode(cfg.p_value_mode), cfg.predictor.clip_eps
        )
        rep = (run_batch if cfg.test is TestKind.BATCH_FR else run_uniform_fr)(pool, bcfg, rng)
        row.update(decision=rep.decision.outcome.value, labels_used=rep.decision.labels_used)
        row.update(p_or_u_final=rep.p_value, degenerate=rep.degenerate)
        row["_result"] = rep
        return row
    scfg = SequentialConfig(
        cfg.budget, cfg.alpha, predictor, cfg.predictor.clip_eps, cfg.budget_includes_init
    )
    if cfg.test is TestKind.PARTITION:
        res = run_partition_example(pool, pspec if pspec is not None else partition_spec(cfg), scfg, rng)
        row["chosen_cell"] = res.chosen_cell
    elif cfg.test is TestKind.BQAST:
        res = run_bqast(pool, scfg, rng)
    else:
        res = run_baseline_sequential(pool, scfg, rng)
    final = res.trajectory[-1] if res.trajectory else 0.0
    row.update(
        decision=res.decision.outcome.value,
        labels_used=res.decision.labels_used,
        stop_step=res.decision.stop_step,
        p_or_u_final=math.exp(final),
    )
    row["_result"] = res
    return row


def _run_trial(cfg: ExperimentConfig, trial: int, pspec) -> dict:
    rng = trial_rng(cfg.seed, trial)
    try:
        X, z = sample(cfg.data, rng)
        pool = CountingPool(X, z)
        row = run_test_on_pool(cfg, pool, rng, pspec)
        row["oracle_calls"] = pool.oracle_calls
        row["error"] = ""
    except LabelTestError as exc:
        log.warning("trial %d failed: %s", trial, exc)
        row = {
            "decision": "Error",
            "labels_used": 0,
            "stop_step": None,
            "p_or_u_final": None,
            "degenerate": False,
            "oracle_calls": 0,
            "error": f"{type(exc).__name__}: {exc}",
        }
    row["trial"] = trial
    return row


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    den = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


TRIAL_COLUMNS = [
    "trial",
    "decision",
    "labels_used",
    "stop_step",
    "p_or_u_final",
    "oracle_calls",
    "degenerate",
    "chosen_cell",
    "error",
]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[dict[str, Any]]
    wall_time: float = 0.0
    results: list[Any] = field(default_factory=list, repr=False)

    @property
    def n_errors(self) -> int:
        return sum(r["decision"] == "Error" for r in self.rows)

    @property
    def n_valid(self) -> int:
        return len(self.rows) - self.n_errors

    @property
    def rejections(self) -> int:
        return sum(r["decision"] == "RejectH0" for r in self.rows)

    @property
    def rejection_rate(self) -> float:
        return self.rejections / self.n_valid if self.n_valid else float("nan")

    @property
    def wilson_ci95(self) -> tuple[float, float]:
        return wilson_interval(self.rejections, self.n_valid)

    @property
    def mean_labels_used(self) -> float:
        used = [r["labels_used"] for r in self.rows if r["decision"] != "Error"]
        return float(np.mean(used)) if used else float("nan")

    def summary(self) -> dict[str, Any]:
        lo, hi = self.wilson_ci95
        # NaN (no valid trials) is not valid JSON
        rate = None if self.n_valid == 0 else self.rejection_rate
        used = None if self.n_valid == 0 else self.mean_labels_used
        return {
            "trials": len(self.rows),
            "valid_trials": self.n_valid,
            "errors": self.n_errors,
            "rejections": self.rejections,
            "rejection_rate": rate,
            "wilson_ci95": [lo, hi],
            "mean_labels_used": used,
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "summary": self.summary(),
            "trials": [{k: r.get(k) for k in TRIAL_COLUMNS} for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: str | Path, stem: str = "report") -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.json").write_text(self.to_json())
        with (out / f"{stem}_trials.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=TRIAL_COLUMNS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: r.get(k) for k in TRIAL_COLUMNS})
        # timing lives outside the report so the report stays byte-reproducible
        (out / f"{stem}_timing.json").write_text(json.dumps({"wall_time_s": self.wall_time}) + "\n")


def run_experiment(cfg: ExperimentConfig, *, keep_results: bool = False) -> ExperimentReport:
    t0 = time.perf_counter()
    pspec = partition_spec(cfg) if cfg.test is TestKind.PARTITION else None
    rows, results = [], []
    for trial in range(cfg.trials):
        row = _run_trial(cfg, trial, pspec)
        res = row.pop("_result", None)
        if keep_results:
            results.append(res)
        rows.append(row)
    return ExperimentReport(cfg, rows, time.perf_counter() - t0, results)


SWEEP_SUMMARY_COLUMNS = [
    "config_hash",
    "test",
    "n_total",
    "n_init",
    "alpha",
    "trials",
    "valid_trials",
    "errors",
    "rejection_rate",
    "ci_lo",
    "ci_hi",
    "mean_labels_used",
]


def sweep(configs: Iterable[ExperimentConfig], out_dir: str | Path | None = None) -> list[ExperimentReport]:
    """Run each config; optionally write combined summary and per-trial CSVs keyed by config hash."""
    reports = [run_experiment(c) for c in configs]
    if out_dir is not None:
        write_sweep(reports, out_dir)
    return reports


def write_sweep(reports: list[ExperimentReport], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "sweep_summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_SUMMARY_COLUMNS)
        w.writeheader()
        for rep in reports:
            c = rep.config
            lo, hi = rep.wilson_ci95
            w.writerow(
                {
                    "config_hash": c.config_hash(),
                    "test": c.test.value,
                    "n_total": c.n_total,
                    "n_init": c.budget.n_init,
                    "alpha": c.alpha,
                    "trials": c.trials,
                    "valid_trials": rep.n_valid,
                    "errors": rep.n_errors,
                    "rejection_rate": rep.rejection_rate,
                    "ci_lo": lo,
                    "ci_hi": hi,
                    "mean_labels_used": rep.mean_labels_used,
                }
            )
    with (out / "sweep_trials.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["config_hash"] + TRIAL_COLUMNS)
        w.writeheader()
        for rep in reports:
            h = rep.config.config_hash()
            for r in rep.rows:
                w.writerow({"config_hash": h, **{k: r.get(k) for k in TRIAL_COLUMNS}})


def write_trajectory(path: str | Path, result) -> None:
    """Per-step CSV of a sequential run: n, log statistic, label, probability used, pool index."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "log_u", "z", "q_used", "queried_index"])
        for n, (logu, (idx, z, q)) in enumerate(zip(result.trajectory, result.state.history), start=1):
            w.writerow([n, repr(float(logu)), z, repr(float(q)), idx])
