"""Configuration-driven experiment runner.

Subcommands: ``simulate``, ``estimate``, ``rates``, ``net-stats``,
``bound-check``.  Every run is deterministic given config + seed: outputs
are CSV data files plus a ``summary.json`` that echoes the resolved
configuration.  Exit codes: 0 success, 2 config error, 3 resource cap,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ResolvedConfig, load_config
from .errors import ConfigError, NumericalError, ResourceError
from .estimators import additive_minimize, delta_net_minimize, dense_minimize
from .estimators import AdditiveComponent, AdditiveSpec
from .indexing import IndexSet
from .models import (
    WhiteNoiseObservation,
    sample_density,
    sample_tomography,
    simulate_white_noise,
)
from .operators import rho_K_whitenoise, rho_Q
from .risk import (
    RateExperiment,
    RiskBoundConstants,
    matched_delta,
    mise_monte_carlo,
    rate_regression,
    rate_target_exponent,
    squared_error,
)
from .serialize import (
    estimate_sidecar,
    format_float,
    points_to_text,
    samples_to_csv,
    white_noise_to_csv,
)
from .spaces import build_delta_net, build_packing_set, fit_loglog_slope, truncation_level

__all__ = ["main"]


def _parallel_map(threads: int):
    if threads <= 1:
        return map

    def mapper(fn, items):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))

    return mapper


def _write(outdir: Path, name: str, text: str):
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / name).write_text(text)


def _write_summary(outdir: Path, payload: dict, cfg: ResolvedConfig):
    payload = dict(payload)
    payload["config"] = cfg.raw
    _write(outdir, "summary.json", json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def _simulate(cfg: ResolvedConfig, n: int, seed, level: int):
    if cfg.model_kind == "white-noise":
        return simulate_white_noise(cfg.truth, cfg.operator, n, seed, level=level)
    if cfg.model_kind == "density":
        return sample_density(cfg.truth, cfg.operator, n, seed)
    return sample_tomography(cfg.truth, n, seed, cfg.operator)


def _obs_csv(cfg: ResolvedConfig, obs) -> str:
    if isinstance(obs, WhiteNoiseObservation):
        return white_noise_to_csv(obs)
    if cfg.operator.kind == "convolution":
        cols = [f"y{i + 1}" for i in range(cfg.d)]
    else:
        cols = ["u", "phi"]
    return samples_to_csv(obs, cols)


def _matched_level(cfg: ResolvedConfig, n: int) -> tuple:
    delta = (
        float(cfg.fixed_delta)
        if cfg.fixed_delta is not None
        else matched_delta(n, cfg.s, cfg.operator.q, cfg.d, cfg.delta_coef)
    )
    return delta, truncation_level(cfg.ellipsoid, delta)


def cmd_simulate(cfg: ResolvedConfig, outdir: Path, threads: int) -> dict:
    level = max(cfg.truth.max_level(), _matched_level(cfg, cfg.n)[1]) if (
        cfg.model_kind == "white-noise"
    ) else 0

    def one(rep: int):
        obs = _simulate(cfg, cfg.n, [cfg.master_seed, rep], level)
        _write(outdir, f"obs_{rep:04d}.csv", _obs_csv(cfg, obs))
        return rep

    list(_parallel_map(threads)(one, range(cfg.reps)))
    summary = {"command": "simulate", "n": cfg.n, "reps": cfg.reps, "files": cfg.reps}
    _write_summary(outdir, summary, cfg)
    return summary


def _build_estimator(cfg: ResolvedConfig, n: int):
    """Returns (estimator_fn, observation level, metadata) for one sample size."""
    if cfg.estimator_kind == "dense":
        delta, M = _matched_level(cfg, n)
        meta = {"delta": delta, "M": M}
        return (
            lambda obs: dense_minimize(
                cfg.ellipsoid, obs, truncation=M, epsilon=cfg.epsilon, op=cfg.operator
            ).estimate,
            M,
            meta,
        )
    if cfg.estimator_kind == "delta-net":
        delta, M = _matched_level(cfg, n)
        net = build_delta_net(cfg.ellipsoid, delta, cap=cfg.net_cap)
        meta = {"delta": delta, "M": M, "net_points": net.count}
        return (
            lambda obs: delta_net_minimize(net, obs, cfg.operator).estimate,
            M,
            meta,
        )
    raise ConfigError(f"estimator kind {cfg.estimator_kind!r} not valid here")


def _additive_setup(cfg: ResolvedConfig, n: int):
    comps, nets, deltas = [], [], []
    for comp in cfg.additive:
        delta = comp["delta_coef"] * float(n) ** (
            -comp["s"] / (2.0 * comp["s"] + 2.0 * comp["q"] + 1.0)
        )
        net = build_delta_net(comp["ellipsoid"], delta, cap=cfg.net_cap)
        comps.append(AdditiveComponent(comp["ellipsoid"], comp["operator"], delta))
        nets.append(net)
        deltas.append(delta)
    return AdditiveSpec(comps), nets, deltas


def _additive_rate_point(cfg: ResolvedConfig, truths, n: int, map_fn) -> tuple:
    spec, nets, deltas = _additive_setup(cfg, n)
    joint_truth_entries = {}
    for t in truths:
        joint_truth_entries.update(t.theta_star.entries)
    from .indexing import CoefficientVector

    joint_truth = CoefficientVector(joint_truth_entries, cfg.space.tag)

    def one_rep(rep: int) -> float:
        pieces = []
        for ci, (t, comp, net) in enumerate(zip(truths, cfg.additive, nets)):
            level = max(net.M, t.max_level())
            pieces.append(
                simulate_white_noise(t, comp["operator"], n, [cfg.master_seed, rep, ci],
                                     level=level)
            )
        indices, values = [], []
        for p in pieces:
            indices.extend(p.index_set.indices)
            values.append(p.z)
        merged = WhiteNoiseObservation(
            index_set=IndexSet(indices), z=np.concatenate(values), n=n,
            seed=[cfg.master_seed, rep],
        )
        res = additive_minimize(spec, nets, merged)
        return squared_error(res.estimate, joint_truth)

    errors = np.array(list(map_fn(one_rep, range(cfg.reps))))
    return float(errors.mean()), float(errors.std(ddof=1) / math.sqrt(cfg.reps)), deltas


def cmd_rates(cfg: ResolvedConfig, outdir: Path, threads: int) -> dict:
    if cfg.reps < 2:
        raise ConfigError("rates needs reps >= 2 (standard error undefined)")
    map_fn = _parallel_map(threads)
    rows = []
    started = time.perf_counter()
    if cfg.estimator_kind == "additive":
        truths = cfg.additive_truths()
        target = max(
            -2.0 * c["s"] / (2.0 * c["s"] + 2.0 * c["q"] + 1.0) for c in cfg.additive
        )
        for n in cfg.ns:
            mean, stderr, _ = _additive_rate_point(cfg, truths, n, map_fn)
            rows.append((n, mean, stderr))
    else:
        target = rate_target_exponent(cfg.s, cfg.operator.q, cfg.d)
        for n in cfg.ns:
            estimator_fn, level, _ = _build_estimator(cfg, n)
            obs_level = max(level, cfg.truth.max_level())

            def sim(truth, op, nn, seed, _lvl=obs_level):
                if cfg.model_kind == "white-noise":
                    return simulate_white_noise(truth, op, nn, seed, level=_lvl)
                return _simulate(cfg, nn, seed, _lvl)

            mean, stderr = mise_monte_carlo(
                cfg.truth, cfg.operator, estimator_fn, n, cfg.reps,
                cfg.master_seed, simulate_fn=sim, map_fn=map_fn,
            )
            rows.append((n, mean, stderr))

    csv_lines = ["n,mise,stderr"] + [
        f"{n},{format_float(m)},{format_float(s)}" for n, m, s in rows
    ]
    _write(outdir, "rates.csv", "\n".join(csv_lines) + "\n")

    exp = RateExperiment(
        ns=[r[0] for r in rows], mises=[r[1] for r in rows],
        stderrs=[r[2] for r in rows], reps=cfg.reps, target_exponent=target,
    )
    slope, slope_se, _ = rate_regression(exp)
    summary = {
        "command": "rates",
        "fitted_slope": slope,
        "slope_stderr": slope_se,
        "target_exponent": target,
        "tolerance": cfg.tolerance,
        "passed": bool(abs(slope - target) <= cfg.tolerance),
        "elapsed_s": round(time.perf_counter() - started, 3),
    }
    _write_summary(outdir, summary, cfg)
    return summary


def cmd_estimate(cfg: ResolvedConfig, outdir: Path, threads: int) -> dict:
    started = time.perf_counter()
    if cfg.estimator_kind == "additive":
        truths = cfg.additive_truths()
        spec, nets, _ = _additive_setup(cfg, cfg.n)
        pieces = []
        for ci, (t, comp, net) in enumerate(zip(truths, cfg.additive, nets)):
            level = max(net.M, t.max_level())
            pieces.append(
                simulate_white_noise(t, comp["operator"], cfg.n,
                                     [cfg.master_seed, 0, ci], level=level)
            )
        indices = [i for p in pieces for i in p.index_set.indices]
        obs = WhiteNoiseObservation(
            index_set=IndexSet(indices), z=np.concatenate([p.z for p in pieces]),
            n=cfg.n, seed=[cfg.master_seed, 0],
        )
        result = additive_minimize(spec, nets, obs)
        delta = sum(c.delta for c in spec.components)
        M = max(net.M for net in nets)
    else:
        delta, M = _matched_level(cfg, cfg.n)
        level = max(M, cfg.truth.max_level())
        obs = _simulate(cfg, cfg.n, [cfg.master_seed, 0], level)
        if cfg.estimator_kind == "dense":
            result = dense_minimize(
                cfg.ellipsoid, obs, truncation=M, epsilon=cfg.epsilon, op=cfg.operator
            )
        else:
            net = build_delta_net(cfg.ellipsoid, delta, cap=cfg.net_cap)
            result = delta_net_minimize(net, obs, cfg.operator)

    _write(outdir, "estimate.txt", points_to_text([result.estimate], delta, M))
    _write(outdir, "estimate.json",
           estimate_sidecar(result, timing_s=round(time.perf_counter() - started, 4)))
    summary = {"command": "estimate", "risk_value": result.risk_value}
    _write_summary(outdir, summary, cfg)
    return summary


def cmd_net_stats(cfg: ResolvedConfig, outdir: Path, threads: int) -> dict:
    rows = []
    for delta in cfg.net_deltas:
        net = build_delta_net(cfg.ellipsoid, delta, materialize=False)
        rho = rho_Q(cfg.operator, net, sample_pairs=0)
        row = {
            "delta": delta,
            "M": net.M,
            "log_count_lo": net.log_count_lo,
            "log_count_mid": net.log_count_mid(),
            "log_count_hi": net.log_count_hi,
            "rho_Q": rho.value,
        }
        if cfg.net_stats_packing:
            packing = build_packing_set(cfg.ellipsoid, delta, cap=cfg.packing_cap,
                                        seed=cfg.master_seed)
            row["packing_count"] = len(packing)
            row["rho_K"] = rho_K_whitenoise(cfg.operator, packing)
        rows.append(row)

    cols = list(rows[0].keys())
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(
            str(r[c]) if isinstance(r[c], int) else format_float(r[c]) for c in cols
        ))
    _write(outdir, "net_stats.csv", "\n".join(lines) + "\n")

    x = np.log(1.0 / np.array([r["delta"] for r in rows]))
    ent_slope, _, _ = fit_loglog_slope(x, np.log([r["log_count_mid"] for r in rows]))
    rho_slope, _, _ = fit_loglog_slope(x, np.log([r["rho_Q"] for r in rows]))
    summary = {
        "command": "net-stats",
        "entropy_slope": ent_slope,
        "entropy_target": cfg.space.entropy_dimension / cfg.s,
        "rho_slope": rho_slope,
        "rho_target": cfg.operator.q / cfg.s,
    }
    if cfg.net_stats_packing:
        rk_slope, _, _ = fit_loglog_slope(x, np.log([r["rho_K"] for r in rows]))
        summary["rho_K_slope"] = rk_slope
        summary["rho_K_target"] = -cfg.operator.q / cfg.s
    _write_summary(outdir, summary, cfg)
    return summary


def cmd_bound_check(cfg: ResolvedConfig, outdir: Path, threads: int) -> dict:
    consts = RiskBoundConstants(xi=cfg.bound_xi, C_tau=cfg.bound_C_tau)
    map_fn = _parallel_map(threads)
    rows = []
    all_pass = True
    from .risk import delta_net_risk_bound

    for n in cfg.ns:
        delta, M = _matched_level(cfg, n)
        net = build_delta_net(cfg.ellipsoid, delta, materialize=False)
        rho = rho_Q(cfg.operator, net, sample_pairs=0).value
        bound = delta_net_risk_bound(consts, delta, net.log_count_hi, rho, n)
        estimator_fn, level, _ = _build_estimator(cfg, n)
        obs_level = max(level, cfg.truth.max_level())

        def sim(truth, op, nn, seed, _lvl=obs_level):
            return simulate_white_noise(truth, op, nn, seed, level=_lvl)

        mean, stderr = mise_monte_carlo(
            cfg.truth, cfg.operator, estimator_fn, n, cfg.reps, cfg.master_seed,
            simulate_fn=sim, map_fn=map_fn,
        )
        ok = mean - 3.0 * stderr <= bound
        all_pass = all_pass and ok
        rows.append((n, mean, stderr, bound, ok))

    lines = ["n,mise,stderr,bound,pass"] + [
        f"{n},{format_float(m)},{format_float(s)},{format_float(b)},{int(ok)}"
        for n, m, s, b, ok in rows
    ]
    _write(outdir, "bound_check.csv", "\n".join(lines) + "\n")
    summary = {
        "command": "bound-check",
        "passed": bool(all_pass),
        "C_tau": cfg.bound_C_tau,
        "xi": cfg.bound_xi,
        "C1": consts.C1,
        "C2": consts.C2,
    }
    _write_summary(outdir, summary, cfg)
    return summary


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "rates": cmd_rates,
    "net-stats": cmd_net_stats,
    "bound-check": cmd_bound_check,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="erminv",
        description="Empirical-risk-minimization estimators for statistical "
        "inverse problems: simulation and rate-verification harness.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="TOML or JSON experiment config")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: machine parallelism)")
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)

    import os

    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    try:
        cfg = ResolvedConfig(load_config(args.config))
        if args.seed is not None:
            cfg.master_seed = args.seed
        outdir = Path(args.out if args.out is not None else cfg.output_dir)
        summary = _COMMANDS[args.command](cfg, outdir, threads)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ResourceError as err:
        print(f"resource cap: {err}", file=sys.stderr)
        return 3
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 4
    print(json.dumps({k: v for k, v in summary.items() if k != "config"}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
