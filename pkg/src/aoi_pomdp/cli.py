"""
Command-line front end.

    aoi-pomdp validate-config --config PATH
    aoi-pomdp solve     --config PATH [--out DIR]
    aoi-pomdp simulate  --config PATH [--policy FILE | --baseline NAME] [--seed N] [--runs N] [--out DIR]
    aoi-pomdp sweep     --config PATH --lambdas 0.25,0.5 [--channels T1,T2] [--metric mse|aoi_mse] [--out DIR]

Exit codes: 0 success, 2 configuration/usage error, 3 policy file does not
match the configuration, 4 numerical failure.
"""

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config
from .errors import NumericalError
from .plot import line_chart_svg
from .sim import BASELINES, SimConfig, monte_carlo, resolve_policy, run_episode, run_seed, sweep_lambda, write_trace_csv
from .solver import build_belief_grid, solve_finite_horizon, value_at
from .storage import FormatError, load_policy, model_hash, save_policy, save_values

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH, EXIT_NUMERICAL = 0, 2, 3, 4
POLICY_FILE, VALUES_FILE = "policy.txt", "values.txt"


class Mismatch(Exception):
    pass


def _meta(cfg: ExperimentConfig, **extra):
    meta = {"config_hash": cfg.config_hash, "config": Path(cfg.source).name}
    meta.update(extra)
    return meta


def _out_dir(args, cfg) -> Path:
    out = Path(args.out if args.out else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _workers() -> int:
    value = os.environ.get("AOI_POMDP_THREADS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError("AOI_POMDP_THREADS", f"expected an integer, got {value!r}")


def _sim_config(cfg: ExperimentConfig, args, policy="optimal", channel=None) -> SimConfig:
    return SimConfig(
        lti=cfg.lti,
        channel=cfg.channel if channel is None else channel,
        cost=cfg.cost,
        horizon=cfg.horizon,
        runs=args.runs if args.runs is not None else cfg.runs,
        seed=args.seed if args.seed is not None else cfg.seed,
        policy=policy,
        resolution=cfg.resolution,
        burn_in=cfg.burn_in,
        initial_belief=cfg.initial_belief,
        x_hat0=cfg.x_hat0,
        P0=cfg.P0,
        workers=_workers(),
    )


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(
        f"ok: n={cfg.lti.n} m={cfg.lti.m} n_c={cfg.channel.n_c} n_r={cfg.channel.n_r} "
        f"N={cfg.horizon} resolution={cfg.resolution} config_hash={cfg.config_hash} "
        f"model_hash={model_hash(cfg.channel, cfg.cost)}"
    )
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    grid = build_belief_grid(cfg.channel.n_c, cfg.resolution)
    table, policy = solve_finite_horizon(cfg.channel, cfg.cost, grid, cfg.horizon, workers=_workers())
    mhash = model_hash(cfg.channel, cfg.cost)
    meta = _meta(cfg)
    save_policy(out / POLICY_FILE, policy, mhash, meta)
    save_values(out / VALUES_FILE, table, mhash, meta)
    uniform = np.full(cfg.channel.n_c, 1.0 / cfg.channel.n_c)
    for aoi in range(cfg.channel.n_r + 1):
        print(f"V0(uniform, aoi={aoi}) = {value_at(table, 0, uniform, aoi):.10g}")
    print(f"wrote {out / POLICY_FILE} and {out / VALUES_FILE}")
    return EXIT_OK


def _load_matching_policy(path, cfg: ExperimentConfig):
    try:
        policy, header = load_policy(path)
    except OSError as exc:
        raise ConfigError("--policy", f"cannot read {path}: {exc.strerror}") from exc
    except FormatError as exc:
        raise ConfigError("--policy", str(exc)) from exc
    expected = model_hash(cfg.channel, cfg.cost)
    if header["model_hash"] != expected:
        raise Mismatch(f"policy {path} was solved for model {header['model_hash']}, config has {expected}")
    if header["n_c"] != cfg.channel.n_c or header["n_r"] != cfg.channel.n_r:
        raise Mismatch(f"policy {path} has n_c={header['n_c']}, n_r={header['n_r']}; config differs")
    if header["N"] < cfg.horizon:
        raise Mismatch(f"policy {path} covers {header['N']} steps, config horizon is {cfg.horizon}")
    return policy


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.policy:
        source, policy = f"file:{Path(args.policy).name}", _load_matching_policy(args.policy, cfg)
    elif args.baseline:
        source, policy = f"baseline:{args.baseline}", args.baseline
    else:
        source, policy = "solved", "optimal"
    out = _out_dir(args, cfg)
    sim = _sim_config(cfg, args, policy)
    rule = resolve_policy(sim)
    metrics = monte_carlo(sim, rule)
    meta = _meta(cfg, seed=sim.seed, runs=sim.runs, burn_in=sim.burn_in, policy=source)

    if "csv" in cfg.formats:
        records = run_episode(sim, run_seed(sim.seed, 0), rule)
        write_trace_csv(out / "trace.csv", records, _meta(cfg, seed=sim.seed, run=0, episode_seed=run_seed(sim.seed, 0), policy=source))
        with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# tool_version = {__version__}\n")
            for key, value in meta.items():
                fh.write(f"# {key} = {value}\n")
            fh.write(f"# mse_mean = {metrics.mse_mean!r}\n# mse_std = {metrics.mse_std!r}\n")
            fh.write(f"# aoi_mse_mean = {metrics.aoi_mse_mean!r}\n# aoi_mse_std = {metrics.aoi_mse_std!r}\n")
            fh.write(f"# mean_cost = {metrics.mean_cost!r}\n# ack_rate = {metrics.ack_rate!r}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["run", "episode_seed", "mse", "aoi_mse", "mean_cost", "ack_rate"])
            for r in range(sim.runs):
                writer.writerow(
                    [r, run_seed(sim.seed, r), repr(metrics.per_run_mse[r]), repr(metrics.per_run_aoi_mse[r]),
                     repr(metrics.per_run_cost[r]), repr(metrics.per_run_ack_rate[r])]
                )
    print(
        f"mse = {metrics.mse_mean:.6g} ± {metrics.mse_std:.3g}  "
        f"aoi_mse = {metrics.aoi_mse_mean:.6g} ± {metrics.aoi_mse_std:.3g}  "
        f"mean_cost = {metrics.mean_cost:.6g}  ack_rate = {metrics.ack_rate:.4f}  (runs={sim.runs})"
    )
    return EXIT_OK


def _parse_lambdas(text):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("--lambdas", f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise ConfigError("--lambdas", "empty list")
    bad = [v for v in values if not 0.0 < v <= 1.0]
    if bad:
        raise ConfigError("--lambdas", f"values must lie in (0, 1], got {bad[0]}")
    return values


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    lambdas = _parse_lambdas(args.lambdas)
    if args.channels:
        names = [n for n in args.channels.split(",") if n.strip()]
        if not names:
            raise ConfigError("--channels", "empty list")
        unknown = [n for n in names if n not in cfg.matrices]
        if unknown:
            raise ConfigError("--channels", f"unknown channel matrix {unknown[0]!r}; known: {sorted(cfg.matrices)}")
        channels = [(n, cfg.channel.with_matrix(cfg.matrices[n])) for n in names]
    else:
        channels = [(cfg.channel_name, cfg.channel)]
    policy = args.baseline if args.baseline else "optimal"
    out = _out_dir(args, cfg)

    rows = []
    for name, channel in channels:
        for lam, m in sweep_lambda(_sim_config(cfg, args, policy, channel), lambdas):
            rows.append((name, lam, m))
            print(f"{name} lambda={lam:g}: mse = {m.mse_mean:.6g} ± {m.mse_std:.3g}  aoi_mse = {m.aoi_mse_mean:.6g} ± {m.aoi_mse_std:.3g}")

    meta = _meta(cfg, seed=args.seed if args.seed is not None else cfg.seed, runs=args.runs or cfg.runs, policy=policy)
    if "csv" in cfg.formats:
        with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# tool_version = {__version__}\n")
            for key, value in meta.items():
                fh.write(f"# {key} = {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["channel", "lambda", "mse_mean", "mse_std", "aoi_mse_mean", "aoi_mse_std", "mean_cost", "ack_rate", "fresh_count"])
            for name, lam, m in rows:
                writer.writerow(
                    [name, repr(lam), repr(m.mse_mean), repr(m.mse_std), repr(m.aoi_mse_mean), repr(m.aoi_mse_std),
                     repr(m.mean_cost), repr(m.ack_rate), m.fresh_count]
                )
    if "svg" in cfg.formats:
        series = []
        for name, _ in channels:
            sel = [(lam, m) for n, lam, m in rows if n == name]
            ys = [getattr(m, f"{args.metric}_mean") for _, m in sel]
            errs = [getattr(m, f"{args.metric}_std") for _, m in sel]
            series.append((name, [lam for lam, _ in sel], ys, errs))
        comments = [f"tool_version = {__version__}"] + [f"{k} = {v}" for k, v in meta.items()]
        svg = line_chart_svg(series, "lambda", args.metric, f"{args.metric} vs HARQ decay", comments)
        (out / "sweep.svg").write_text(svg, encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoi-pomdp", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="config file or bundled name (paper-section-5)")
        p.add_argument("--out", help="output directory (default: output.directory from the config)")

    p = sub.add_parser("validate-config", help="check a configuration file")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="solve for the optimal policy and write policy/value files")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo simulation of a policy")
    common(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--policy", help="policy file written by 'solve'")
    group.add_argument("--baseline", choices=BASELINES)
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="re-solve and simulate over HARQ decay values")
    common(p)
    p.add_argument("--lambdas", required=True, help="comma-separated values in (0, 1]")
    p.add_argument("--channels", help="comma-separated names from [channel.matrices]")
    p.add_argument("--baseline", choices=BASELINES)
    p.add_argument("--metric", choices=("mse", "aoi_mse"), default="mse", help="quantity plotted in sweep.svg")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    for flag in ("runs", "seed"):
        value = getattr(args, flag, None)
        if value is not None and value < (1 if flag == "runs" else 0):
            parser.error(f"--{flag} must be {'positive' if flag == 'runs' else 'nonnegative'}")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Mismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
