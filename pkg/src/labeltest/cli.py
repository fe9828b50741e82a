"""Command-line interface.

    labeltest gen --config exp.toml --out data/
    labeltest batch|bqast|baseline-seq|partition --config exp.toml --out runs/ [--trials N] [--alpha A] [--seed S]
    labeltest batch|bqast|baseline-seq|partition --config exp.toml --data pool.csv --out runs/
    labeltest fr --data labeled.csv --out runs/
    labeltest sweep --config sweep.toml --out runs/
    labeltest bounds --nq 100 --alpha 0.05 --mi 0.1 --sigma 1

Exit status is 0 on completion and 2 on configuration or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from labeltest.core import DatasetError, LabelTestError, load_labeled, save_dataset
from labeltest.diagnostics import PowerBoundInputs, power_lower_bounds
from labeltest.graph_fr import PValueMode, fr_test
from labeltest.harness import (
    ConfigError,
    CountingPool,
    ExperimentConfig,
    TestKind,
    config_from_dict,
    load_config_file,
    partition_spec,
    run_experiment,
    run_test_on_pool,
    sweep,
    write_trajectory,
)
from labeltest.synthetic import sample

EXIT_CONFIG = 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML or JSON experiment config")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--trials", type=int, help="number of Monte Carlo trials (overrides config)")
    p.add_argument("--alpha", type=float, help="significance level (overrides config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="labeltest", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a synthetic dataset CSV")
    _common(p)
    p.add_argument("--name", default="dataset.csv")

    for name in ("batch", "bqast", "baseline-seq", "partition"):
        p = sub.add_parser(name, help=f"run the {name} test")
        _common(p)
        p.add_argument("--data", type=Path, help="run once on this dataset CSV instead of synthetic trials")
        p.add_argument("--save-trajectories", action="store_true", help="write per-step CSVs (sequential tests)")

    p = sub.add_parser("fr", help="plain FR test on a fully labeled CSV")
    _common(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--mode", choices=[m.value for m in PValueMode], default="permutation")

    p = sub.add_parser("sweep", help="run every experiment listed in a config file")
    _common(p)

    p = sub.add_parser("bounds", help="evaluate the finite-sample power lower bounds")
    p.add_argument("--config", type=Path)
    p.add_argument("--out", type=Path)
    p.add_argument("--nq", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mi", type=float)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--eps1", type=float, default=0.0)
    p.add_argument("--eps2", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    return parser


def _overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    for key in ("seed", "trials", "alpha"):
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
    return raw


def _load(args, test: str | None) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    return config_from_dict(_overrides(load_config_file(args.config), args), test)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_gen(args) -> None:
    cfg = _load(args, "batch")
    X, z = sample(cfg.data, np.random.default_rng(cfg.seed))
    args.out.mkdir(parents=True, exist_ok=True)
    save_dataset(args.out / args.name, X, z)
    print(args.out / args.name)


def cmd_test(args) -> None:
    test = TestKind(args.command)
    cfg = _load(args, test)
    if args.data is not None:
        data = load_labeled(args.data)
        pool = CountingPool(data.features, data.labels)
        pspec = partition_spec(cfg) if test is TestKind.PARTITION else None
        row = run_test_on_pool(cfg, pool, np.random.default_rng([cfg.seed, 0]), pspec)
        res = row.pop("_result")
        row["oracle_calls"] = pool.oracle_calls
        _write_json(args.out / "single_run.json", {"config": cfg.to_dict(), "result": row})
        if args.save_trajectories and hasattr(res, "trajectory"):
            write_trajectory(args.out / "trajectory.csv", res)
        print(json.dumps(row, sort_keys=True))
        return
    rep = run_experiment(cfg, keep_results=args.save_trajectories)
    rep.write(args.out)
    if args.save_trajectories and test is not TestKind.BATCH_FR:
        tdir = args.out / "trajectories"
        tdir.mkdir(parents=True, exist_ok=True)
        for row, res in zip(rep.rows, rep.results):
            if res is not None:
                write_trajectory(tdir / f"trial_{row['trial']:05d}.csv", res)
    print(json.dumps(rep.summary(), sort_keys=True))


def cmd_fr(args) -> None:
    data = load_labeled(args.data)
    seed = 0 if args.seed is None else args.seed
    res = fr_test(
        data.features, data.labels, mode=args.mode, num_perms=args.permutations, rng=np.random.default_rng(seed)
    )
    out = {
        "r_n": res.r_n,
        "w_n": res.w_n,
        "p_value": res.p_value,
        "null_mean": res.moments.mean,
        "null_var": res.moments.var,
        "null_method": res.moments.method.value,
        "null_draws": res.moments.num_draws,
    }
    if args.alpha is not None:
        out["reject"] = res.p_value < args.alpha
    _write_json(args.out / "fr.json", out)
    print(json.dumps(out, sort_keys=True))


def cmd_sweep(args) -> None:
    if args.config is None:
        raise ConfigError("--config is required")
    raw = load_config_file(args.config)
    experiments = raw.get("experiments")
    if not experiments:
        raise ConfigError("sweep config needs an 'experiments' list")
    defaults = raw.get("defaults", {})
    configs = []
    for exp in experiments:
        merged = {**defaults, **exp}
        if "data" in defaults and "data" in exp:
            merged["data"] = {**defaults["data"], **exp["data"]}
        configs.append(config_from_dict(_overrides(merged, args)))
    reports = sweep(configs, args.out)
    for rep in reports:
        print(rep.config.config_hash(), json.dumps(rep.summary(), sort_keys=True))


def cmd_bounds(args) -> None:
    vals = {}
    if args.config is not None:
        vals.update(load_config_file(args.config).get("bounds", {}))
    for key, attr in (("n_q", "nq"), ("alpha", "alpha"), ("mi", "mi")):
        if getattr(args, attr) is not None:
            vals[key] = getattr(args, attr)
    for key in ("delta", "eps1", "eps2", "sigma"):
        vals.setdefault(key, getattr(args, key))
    missing = [k for k in ("n_q", "alpha", "mi") if k not in vals]
    if missing:
        raise ConfigError(f"missing bound inputs: {missing}")
    try:
        inp = PowerBoundInputs(**vals)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    proposed, baseline = power_lower_bounds(inp)
    out = {"inputs": dataclasses.asdict(inp), "proposed": proposed, "baseline": baseline}
    if args.out is not None:
        _write_json(args.out / "bounds.json", out)
    print(json.dumps(out, sort_keys=True))


COMMANDS = {
    "gen": cmd_gen,
    "batch": cmd_test,
    "bqast": cmd_test,
    "baseline-seq": cmd_test,
    "partition": cmd_test,
    "fr": cmd_fr,
    "sweep": cmd_sweep,
    "bounds": cmd_bounds,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ConfigError, DatasetError) as exc:
        print(f"labeltest: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabelTestError as exc:
        print(f"labeltest: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
