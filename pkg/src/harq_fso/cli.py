"""Command-line front end: ``harq-fso {op-curve,optimize,throughput,validate}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from . import config as config_mod
from .errors import ConfigError, HarqFsoError
from .harq_analysis import (
    OutageMethod, Scheme, asymptotic_coefficients, mutual_info_cc, mutual_info_ir, outage,
    per_round_outage,
)
from .monte_carlo import SimSettings, empirical_fade_cdf, gg_pe_cdf_quadrature, simulate_harq
from .power_optimizer import budget, equal_split, objective_value, optimize, optimize_throughput
from .special_functions import gg_pe_fade_cdf

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

OP_CURVE_COLUMNS = (
    "gamma_bar_db", "op_cc_exact", "op_cc_asym", "op_ir_exact", "op_ir_asym",
    "op_cc_mc", "op_cc_mc_stderr", "op_ir_mc", "op_ir_mc_stderr",
)
THROUGHPUT_COLUMNS = ("row_type", "R", "omega_optimized", "omega_equal_split")
VALIDATE_COLUMNS = ("check", "passed", "measured", "limit", "detail")


def optimize_columns(J: int) -> tuple:
    return ("R", "op_optimized", "op_equal_split") + tuple(f"P_{j}" for j in range(1, J + 1)) + ("iterations", "converged")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(columns, rows, fmt: str) -> str:
    """Serialize rows (dicts) in a fixed column order."""
    if fmt == "json":
        records = [{c: _json_value(r.get(c)) for c in columns} for r in rows]
        return json.dumps({"columns": list(columns), "rows": records}, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


# -- subcommands ---------------------------------------------------------------

def _curve_powers(run, model, scheme):
    if run.allocation == "optimized":
        opt = replace(run.opt_config(scheme=scheme), channel=model)
        return optimize(opt, run.sca).P_star.as_array()
    return config_mod.allocation_powers(run)


def cmd_op_curve(run) -> tuple:
    rows = []
    for db in run.sweep_db:
        model = run.channel_at(db)
        row = {"gamma_bar_db": float(db)}
        for scheme in (Scheme.CC, Scheme.IR):
            cfg = replace(run.harq, scheme=scheme)
            P = _curve_powers(run, model, scheme)
            tag = scheme.value.lower()
            row[f"op_{tag}_exact"] = outage(P, cfg, model, OutageMethod.EXACT)
            row[f"op_{tag}_asym"] = outage(P, cfg, model, OutageMethod.ASYMPTOTIC)
            if run.simulate:
                rep = simulate_harq(scheme, P, cfg, model, run.sim)
                row[f"op_{tag}_mc"] = rep.per_round_outage[-1]
                row[f"op_{tag}_mc_stderr"] = rep.per_round_stderr[-1]
        rows.append(row)
    return OP_CURVE_COLUMNS, rows, EXIT_OK


def cmd_optimize(run) -> tuple:
    J = run.harq.J
    rows = []
    failures = 0
    for R in run.rate_grid:
        opt = run.opt_config(R=R)
        cfg = opt.harq()
        row = {"R": float(R), "op_equal_split": outage(equal_split(opt), cfg, opt.channel)}
        try:
            res = optimize(opt, run.sca)
        except HarqFsoError as exc:
            log.warning("R=%g: optimization failed: %s", R, exc)
            failures += 1
            row.update({"op_optimized": float("nan"), "iterations": 0, "converged": False})
            rows.append(row)
            continue
        P = res.P_star.as_array()
        row["op_optimized"] = outage(P, cfg, opt.channel)
        for j, p in enumerate(P, start=1):
            row[f"P_{j}"] = float(p)
        row["iterations"] = res.outer_iterations
        row["converged"] = res.converged
        rows.append(row)
    if failures == len(run.rate_grid):
        raise HarqFsoError("optimization failed at every rate")
    return optimize_columns(J), rows, EXIT_OK


def cmd_throughput(run) -> tuple:
    template = run.opt_config()
    res = optimize_throughput(template, run.rate_grid, run.sca)
    rows = [{"row_type": "point", "R": p.R, "omega_optimized": p.omega_optimized,
             "omega_equal_split": p.omega_equal_split} for p in res.points]
    at_star = next(p for p in res.points if p.R == res.R_star)
    rows.append({"row_type": "summary", "R": res.R_star, "omega_optimized": res.omega_star,
                 "omega_equal_split": at_star.omega_equal_split})
    return THROUGHPUT_COLUMNS, rows, EXIT_OK


def _check(rows, name, passed, measured, limit, detail=""):
    rows.append({"check": name, "passed": bool(passed), "measured": float(measured),
                 "limit": float(limit), "detail": detail})


def _log_slope(xs_db, ys):
    x = np.asarray(xs_db, dtype=float) / 10.0
    y = np.log10(np.asarray(ys, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def cmd_validate(run) -> tuple:
    """Oracle triangle and invariant checks at the configured scale."""
    rows = []
    model = run.channel_at(run.gamma_bar_db)
    a, b, xi2 = model.alpha, model.beta, model.xi2

    # fade CDF: series vs quadrature vs empirical
    u = np.geomspace(1e-4, 1.0, run.u_points)
    series = np.array([gg_pe_fade_cdf(x, a, b, xi2) for x in u])
    quad = gg_pe_cdf_quadrature(u, a, b, xi2)
    _check(rows, "cdf_series_vs_quadrature", np.abs(series - quad).max() <= 1e-6,
           np.abs(series - quad).max(), 1e-6, "max absolute difference")
    emp = empirical_fade_cdf(u, model, run.fade_samples, seed=run.sim.seed)
    se = np.sqrt(np.maximum(series * (1.0 - series), 1e-300) / run.fade_samples)
    z = float(np.max(np.abs(emp - series) / se))
    _check(rows, "cdf_series_vs_empirical", z <= 4.0, z, 4.0, "max standard errors")

    # closed forms vs simulation
    P = config_mod.allocation_powers(run)
    cc_cfg = replace(run.harq, scheme=Scheme.CC)
    ir_cfg = replace(run.harq, scheme=Scheme.IR)
    cc_exact = np.array(per_round_outage(P, cc_cfg, model).per_round)
    ir_exact = np.array(per_round_outage(P, ir_cfg, model).per_round)
    cc_mc = simulate_harq(Scheme.CC, P, cc_cfg, model, run.sim)
    ir_mc = simulate_harq(Scheme.IR, P, ir_cfg, model, run.sim)
    se_cc = np.maximum(np.array(cc_mc.per_round_stderr), 1.0 / run.sim.num_packets)
    se_ir = np.maximum(np.array(ir_mc.per_round_stderr), 1.0 / run.sim.num_packets)
    zc = float(np.max(np.abs(np.array(cc_mc.per_round_outage) - cc_exact) / se_cc))
    _check(rows, "cc_exact_vs_mc", zc <= 3.0, zc, 3.0, "max standard errors over rounds")
    zi = float(np.min((ir_exact - np.array(ir_mc.per_round_outage)) / se_ir))
    _check(rows, "ir_exact_upper_bounds_mc", zi >= -3.0, zi, -3.0, "min standard errors of bound slack")

    # invariants of the analysis
    mono = max(float(np.max(np.diff(cc_exact), initial=0.0)), float(np.max(np.diff(ir_exact), initial=0.0)))
    _check(rows, "outage_monotone_in_round", mono <= 1e-12, mono, 1e-12, "largest increase across rounds")
    gap = float(np.max(ir_exact[1:] - cc_exact[1:], initial=0.0))
    _check(rows, "ir_below_cc_equal_power", gap <= 1e-12, gap, 1e-12, "largest IR - CC excess")
    rng = np.random.default_rng(run.sim.seed)
    g = rng.exponential(1e3, size=(10_000, run.harq.J))
    mi_gap = float(np.min(mutual_info_ir(g, run.harq.c) - mutual_info_cc(g, run.harq.c)))
    _check(rows, "mutual_info_ir_ge_cc", mi_gap >= -1e-12, mi_gap, -1e-12, "min IR - CC")

    # high-SNR consistency
    hi = run.channel_at(80.0)
    Pk = np.full(run.harq.J, run.Pmax)
    for scheme, cfg in (("cc", cc_cfg), ("ir", ir_cfg)):
        ex = outage(Pk, cfg, hi, OutageMethod.EXACT)
        asym = outage(Pk, cfg, hi, OutageMethod.ASYMPTOTIC, clamp=False)
        if scheme == "cc":
            asym *= run.psi_scale
        ratio = asym / ex
        _check(rows, f"asymptotic_ratio_{scheme}", 0.9 <= ratio <= 1.1, ratio, 1.1, "asymptotic / exact at 80 dB")
        grid = np.linspace(70.0, 80.0, 11)
        ys = [outage(Pk, cfg, run.channel_at(d), OutageMethod.EXACT) for d in grid]
        k = asymptotic_coefficients(cfg, hi).k
        slope = _log_slope(grid, ys)
        err = abs(slope / (-k / 2.0) - 1.0)
        _check(rows, f"asymptotic_slope_{scheme}", err <= 0.05, err, 0.05,
               f"relative slope error (fitted {slope:.6f}, target {-k / 2:.6f})")

    # optimizer feasibility and benchmark
    for scheme in (Scheme.CC, Scheme.IR):
        opt = run.opt_config(scheme=scheme)
        res = optimize(opt, run.sca)
        Popt = res.P_star.as_array()
        excess = budget(Popt, opt) - opt.P0
        box = bool(np.all(Popt >= 0) and np.all(Popt <= opt.Pmax))
        _check(rows, f"optimizer_feasible_{scheme.value.lower()}", excess <= 1e-9 and box, excess, 1e-9,
               "budget excess over P0")
        eq = objective_value(equal_split(opt), opt)
        _check(rows, f"optimizer_beats_equal_split_{scheme.value.lower()}", res.objective <= eq,
               res.objective / eq, 1.0, "optimized / equal-split asymptotic objective")

    # simulator determinism
    again = simulate_harq(Scheme.CC, P, cc_cfg, model, replace(run.sim, parallel_chunks=run.sim.parallel_chunks + 3))
    same = again.to_json() == cc_mc.to_json()
    _check(rows, "simulator_chunk_invariance", same, 0.0 if same else 1.0, 0.0, "report differs when chunking changes")

    status = EXIT_OK if all(r["passed"] for r in rows) else EXIT_VALIDATION
    return VALIDATE_COLUMNS, rows, status


COMMANDS = {
    "op-curve": cmd_op_curve,
    "optimize": cmd_optimize,
    "throughput": cmd_throughput,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="harq-fso", description="HARQ over FSO: outage, power allocation, throughput.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration (defaults used when omitted)")
        p.add_argument("--out", help="output file (stdout when omitted)")
        p.add_argument("--seed", type=int, help="override simulation.seed")
        p.add_argument("--packets", type=int, help="override simulation.num_packets")
        p.add_argument("--format", choices=("csv", "json"), help="override output.format")
        p.add_argument("--simulate", action="store_true", help="enable Monte Carlo columns")
    return parser


def _apply_overrides(run, args):
    updates = {}
    if args.seed is not None or args.packets is not None:
        try:
            sim = SimSettings(
                num_packets=run.sim.num_packets if args.packets is None else args.packets,
                seed=run.sim.seed if args.seed is None else args.seed,
                parallel_chunks=run.sim.parallel_chunks,
            )
        except HarqFsoError as exc:
            raise ConfigError("--packets" if args.packets is not None else "--seed", str(exc)) from exc
        updates["sim"] = sim
    if args.format is not None:
        updates["fmt"] = args.format
    if args.simulate:
        updates["simulate"] = True
    return replace(run, **updates) if updates else run


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        run = _apply_overrides(config_mod.load(args.config), args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        columns, rows, status = COMMANDS[args.command](run)
    except HarqFsoError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = render(columns, rows, run.fmt)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
