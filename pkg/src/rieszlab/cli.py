"""Command-line front end.

``rieszlab <kind> --config FILE [--seed N] [--out DIR] [--threads N]``

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import KINDS, ExperimentConfig, load_config
from .errors import ConfigError, NumericalError, RieszLabError
from .evaluator import (BoxSpec, evaluate_zeta, evaluate_zeta_extrapolated,
                        evaluate_zeta_sup, occupation_zeta_extrapolated)
from .experiments import run_scaling_test, run_sobolev_checks, run_tail_experiment
from .moments import (FrequencyConfig, first_moment_closed_form, moment_fourier,
                      moment_growth_sequence, moment_path_mc_orders, rough_upper_bound)
from .params import ldp_rate_constant, scaling_exponent
from .records import write_record, write_table
from .rng import make_rng
from .sampler import TimeGrid, sample_path_bundle
from .variational import (GridSpec, OptimizerSpec, finiteness_radius, j_duality_check,
                          maximize_lambda)

__all__ = ["run_cli", "main", "execute"]

OUT_ENV = "RIESZLAB_OUT"
STREAM_SIMULATE = 51


def _simulate(cfg: ExperimentConfig, threads: int):
    o, prm = cfg.options, cfg.params
    grid = TimeGrid(o["horizon"], cfg.budget.n_steps)
    box = BoxSpec.cube(o["horizon"], prm.p)
    rng = make_rng(cfg.seed, STREAM_SIMULATE)
    bundle = sample_path_bundle(prm, grid, rng)
    direct = evaluate_zeta(bundle, box)
    extrap = evaluate_zeta_extrapolated(bundle, box)
    occ = occupation_zeta_extrapolated(bundle, box, prm.z_array, o["bin_width"])
    zstar, sup = evaluate_zeta_sup(bundle, box, o["search_radius"], o["coarse_step"])
    values = [direct.to_record(cfg.seed), extrap.to_record(cfg.seed), sup.to_record(cfg.seed)]
    outputs = {"zeta": values, "occupation_extrapolated": occ, "z_star": zstar.tolist()}
    header = ["step", "path"] + [f"x{i + 1}" for i in range(prm.d)]
    tables = {"paths": (header, bundle.to_csv_rows()),
              "zeta": (["method", "eps", "value"],
                       [[v["method"], v["eps"], v["value"]] for v in values]
                       + [["occupation-convolution-extrapolated", 0.0, occ]])}
    return outputs, tables


def _moment(cfg: ExperimentConfig, threads: int):
    o, prm = cfg.options, cfg.params
    orders = sorted(set(o["orders"]))
    rows, ests = [], {}
    if "fourier" in o["methods"]:
        for m in orders:
            e = moment_fourier(FrequencyConfig(m, prm, n_samples=o["fourier_samples"]),
                               seed=cfg.seed, threads=threads)
            ests[("fourier", m)] = e
    if "path" in o["methods"]:
        res = moment_path_mc_orders(prm, orders, cfg.budget.n_samples, cfg.budget.n_steps,
                                    seed=cfg.seed, threads=threads)
        for m in orders:
            ests[("path", m)] = res[m]
    for key in sorted(ests):
        rows.append(ests[key].to_row())
    outputs = {
        "estimates": [dict(r, diagnostics=ests[k].diagnostics) for k, r in zip(sorted(ests), rows)],
        "first_moment_closed_form": first_moment_closed_form(prm),
        "rough_upper_bound": {str(m): rough_upper_bound(prm, m) for m in orders},
    }
    if "fourier" in o["methods"] and orders == list(range(1, len(orders) + 1)):
        outputs["growth_sequence"] = moment_growth_sequence(
            prm, [ests[("fourier", m)].value for m in orders]).tolist()
    if "fourier" in o["methods"] and "path" in o["methods"]:
        outputs["cross_route_z"] = {
            str(m): (ests[("fourier", m)].value - ests[("path", m)].value)
            / math.hypot(ests[("fourier", m)].std_error, ests[("path", m)].std_error)
            for m in orders}
    header = list(rows[0].keys()) if rows else []
    return outputs, {"moments": (header, [list(r.values()) for r in rows])}


def _variational(cfg: ExperimentConfig, threads: int):
    o, prm = cfg.options, cfg.params
    grid = GridSpec(n_radii=cfg.budget.K, n_basis=o["n_basis"], n_freq=o["n_freq"])
    opt = OptimizerSpec(restarts=cfg.budget.restarts)
    res = maximize_lambda(prm, grid, opt, seed=cfg.seed, theta=o["theta"], threads=threads)
    out = res.to_record()
    out["rate_constants"] = ldp_rate_constant(prm, res.rho).to_record() if res.rho > 0 else None
    if o["duality"] and o["theta"] == 1.0:
        out["duality"] = j_duality_check(res, seed=cfg.seed, threads=threads).to_record()
    if prm.p == 1:
        out["finiteness_radius"] = finiteness_radius(prm)
    return out, {"maximizer": (["r", "g"], res.maximizer.to_csv_rows())}


def _resolve_rho(cfg: ExperimentConfig, threads: int) -> tuple:
    o = cfg.options
    if o["rho"] is not None:
        return float(o["rho"]), "config"
    if o["rho_file"]:
        base = Path(cfg.source).parent if cfg.source else Path(".")
        path = Path(o["rho_file"])
        path = path if path.is_absolute() else base / path
        if not path.is_file():
            raise ConfigError(f"tail.rho_file: file not found: {path}")
        try:
            rec = json.loads(path.read_text(encoding="utf-8"))
            rho = float(rec["outputs"]["rho"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"tail.rho_file: no outputs.rho in {path}: {exc}") from None
        return rho, str(o["rho_file"])
    grid = GridSpec(n_radii=cfg.budget.K)
    res = maximize_lambda(cfg.params, grid, OptimizerSpec(restarts=cfg.budget.restarts),
                          seed=cfg.seed, threads=threads)
    return res.rho, "solver"


def _tail(cfg: ExperimentConfig, threads: int):
    o, prm = cfg.options, cfg.params
    rho, src = _resolve_rho(cfg, threads)
    fit, _ = run_tail_experiment(prm, rho, cfg.budget.n_samples, cfg.budget.n_steps, cfg.seed,
                                 threads=threads, tolerance_factor=o["tolerance_factor"],
                                 moment_orders=o["moment_orders"],
                                 moment_samples=o["moment_samples"], eps_ratio=o["eps_ratio"])
    out = fit.to_record()
    out["rho_source"] = src
    rows = [[t, k, ls, lo, hi] for t, k, ls, lo, hi in zip(
        fit.thresholds, fit.counts, fit.log_survival, fit.wilson_low, fit.wilson_high)]
    return out, {"thresholds": (["threshold", "count", "log_survival", "wilson_low", "wilson_high"], rows)}


def _scaling(cfg: ExperimentConfig, threads: int):
    o, prm = cfg.options, cfg.params
    reps = [run_scaling_test(prm, o["t_factor"], cfg.budget.n_samples, cfg.budget.n_steps,
                             cfg.seed, o["exponent_shift"], rep=r, threads=threads)
            for r in range(o["repetitions"])]
    out = {"reports": [r.to_record() for r in reps],
           "passed_all": all(r.passed for r in reps),
           "scaling_exponents": list(scaling_exponent(prm))}
    rows = [[i, r.statistic, r.p_value, r.passed] for i, r in enumerate(reps)]
    return out, {"ks": (["repetition", "statistic", "p_value", "passed"], rows)}


def _sobolev(cfg: ExperimentConfig, threads: int):
    o, prm = cfg.options, cfg.params
    rep = run_sobolev_checks(prm, o["trials"], o["n"], cfg.seed, o["half_width"])
    rows = [[i, a, b, c, d] for i, (a, b, c, d) in enumerate(zip(
        rep.conv_ratios, rep.conv_ratios_fine, rep.corr_ratios, rep.corr_ratios_fine))]
    return rep.to_record(), {"trials": (["trial", "conv_ratio", "conv_ratio_fine",
                                          "corr_ratio", "corr_ratio_fine"], rows)}


_RUNNERS = {
    "simulate": _simulate,
    "moment": _moment,
    "variational": _variational,
    "tail": _tail,
    "scaling-test": _scaling,
    "sobolev-check": _sobolev,
}


def execute(cfg: ExperimentConfig, out_dir, threads: int = 1) -> Path:
    """Run one experiment and persist its record and tables."""
    outputs, tables = _RUNNERS[cfg.kind](cfg, threads)
    for name, (header, rows) in tables.items():
        write_table(out_dir, cfg.kind, cfg.seed, name, header, rows)
    return write_record(out_dir, cfg.kind, cfg.seed, cfg.to_record(), outputs)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rieszlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind)
        sp.add_argument("--config", required=True, help="TOML configuration file")
        sp.add_argument("--seed", type=int, default=None, help="root seed (overrides the file)")
        sp.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
        sp.add_argument("--threads", type=int, default=1, help="worker threads")
    return ap


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the experiment and return the exit code."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        if args.threads < 1:
            raise ConfigError("--threads: expected a positive integer")
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed: expected a nonnegative integer")
        cfg = load_config(args.config, args.kind, args.seed)
        out = args.out or os.environ.get(OUT_ENV, ".")
        path = execute(cfg, out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, RieszLabError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(path)
    return 0


def main() -> None:
    sys.exit(run_cli())
