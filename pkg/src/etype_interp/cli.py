"""etype-interp command line: config parsing, experiment dispatch, CSV/JSON output."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, selftest
from .config import SCHEMA_VERSION, ExperimentConfig, load
from .errors import EtypeError
from .interp import lagrange_eval
from .nodes import find_nodes, phase_count_gap
from .systems import Family, eval_E
from .verify import (
    run_hbweight_convergence,
    run_hermite_convergence,
    run_lagrange_convergence,
    run_mz_sweep,
    run_reproducing_check,
)

log = logging.getLogger("etype_interp")

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

HEADERS = {
    "nodes": ["index", "node", "residual", "spacing_times_tau"],
    "interp": ["z", "value", "tail_bound", "nodes_used"],
    "mz": ["tau", "p", "discrete_sum", "continuous_norm_p", "lower_ratio", "upper_ratio"],
    "reproduce": ["w0", "S_value", "K_diag", "deviation", "relative_deviation", "tail"],
    "lagrange": ["tau", "weighted_error", "tail_budget", "nodes_used", "origin_integral"],
    "hermite": [
        "tau",
        "weighted_error",
        "tail_budget",
        "nodes_used",
        "value_residual",
        "derivative_residual",
        "derivative_damping",
    ],
}


def fmt(v) -> str:
    """Fixed CSV formatting: integers as-is, floats to 17 significant digits."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([fmt(x) for x in r])


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _crit(ok, **measured) -> dict:
    return {"pass": bool(ok), "measured": _clean(measured)}


# ------------------------------------------------------------- experiments


def exp_nodes(cfg: ExperimentConfig, out: Path) -> dict:
    sys_ = cfg.system_obj()
    ns = find_nodes(sys_, tuple(cfg.window), workers=cfg.workers)
    sp = np.append(ns.spacings_times_tau, np.nan)
    write_csv(out / "nodes.csv", HEADERS["nodes"], zip(ns.indices, ns.nodes, ns.residuals, sp))
    a = np.abs(np.asarray(eval_E(sys_, ns.nodes).A))
    worst = float(np.max(ns.residuals / np.maximum(1.0, a))) if len(ns) else 0.0
    gap = phase_count_gap(sys_, ns)
    return {
        "residuals": _crit(worst <= 1e-11, max_scaled_residual=worst, limit=1e-11),
        "phase_count_completeness": _crit(gap <= 1.0, max_gap=gap, count=len(ns)),
    }


def exp_interp(cfg: ExperimentConfig, out: Path) -> dict:
    sys_ = cfg.system_obj()
    ns = find_nodes(sys_, tuple(cfg.window), workers=cfg.workers)
    f = cfg.target_obj(sys_)
    z = cfg.z_values()
    sv = lagrange_eval(sys_, ns, f, z, cfg.policy_obj())
    n = np.full(z.shape, sv.nodes_used)
    write_csv(out / "interp.csv", HEADERS["interp"], zip(z, sv.value, sv.tail_bound, n))
    finite = bool(np.all(np.isfinite(sv.tail_bound)))
    return {"finite_tail_bounds": _crit(finite, max_tail_bound=float(np.max(sv.tail_bound)))}


def exp_mz(cfg: ExperimentConfig, out: Path) -> dict:
    base = cfg.system_obj()
    uw = cfg.quadrature["unit_window"] or 2000.0
    rep = run_mz_sweep(
        base, cfg.taus, cfg.p, cfg.test_function, cfg.w0, cfg.criteria["uniformity_factor"], uw, cfg.workers
    )
    rows = [(r.tau, r.p, r.discrete_sum, r.continuous_norm_p, r.lower_ratio, r.upper_ratio) for r in rep.records]
    write_csv(out / "mz.csv", HEADERS["mz"], rows)
    res = {
        "tau_uniformity": _crit(
            rep.success, lower_spread=rep.lower_spread, upper_spread=rep.upper_spread, factor=rep.factor
        )
    }
    if cfg.test_function == "sinc" and base.family is Family.SINC and cfg.p == 2.0:
        dev = max(abs(r.lower_ratio - math.pi) for r in rep.records)
        res["lower_ratio_pi"] = _crit(dev <= cfg.criteria["pi_tol"], max_deviation=dev, tol=cfg.criteria["pi_tol"])
    return res


def exp_reproduce(cfg: ExperimentConfig, out: Path) -> dict:
    sys_ = cfg.system_obj()
    uw = cfg.quadrature["unit_window"] or 2e4
    r = run_reproducing_check(sys_, cfg.w0, uw, cfg.quadrature["points_per_panel"], cfg.criteria["reproduce_tol"])
    write_csv(
        out / "reproduce.csv",
        HEADERS["reproduce"],
        [(r.w0, r.S_value, r.K_diag, r.deviation, r.relative_deviation, r.tail)],
    )
    return {"reproducing_identity": _crit(r.success, relative_deviation=r.relative_deviation, tail=r.tail)}


def _convergence_criteria(cfg: ExperimentConfig, rep) -> dict:
    c = cfg.criteria
    e = rep.errors
    res = {"strictly_decreasing": _crit(rep.strictly_decreasing, errors=e)}
    last = rep.records[-1]
    if rep.reference is not None:
        bound = c["reference_factor"] * rep.reference.weighted_error + last.tail_budget
        res["reference"] = _crit(
            last.weighted_error <= bound,
            error=last.weighted_error,
            reference_error=rep.reference.weighted_error,
            reference_tau=rep.reference.tau,
            bound=bound,
        )
    if c["final_error_max"] is not None:
        res["final_error"] = _crit(last.weighted_error < c["final_error_max"], error=last.weighted_error, limit=c["final_error_max"])
    return res


def _sweep_args(cfg: ExperimentConfig):
    return dict(
        reference_tau=cfg.reference_tau,
        radius=cfg.policy.get("radius"),
        workers=cfg.workers,
        points=cfg.quadrature["points_per_panel"],
        X=cfg.quadrature["X"],
    )


def _lagrange_rows(rep):
    return [(r.tau, r.weighted_error, r.tail_budget, r.nodes_used, r.origin_integral) for r in rep.records]


def exp_lagrange(cfg: ExperimentConfig, out: Path) -> dict:
    base = cfg.system_obj()
    rep = run_lagrange_convergence(base, cfg.weight_mode, cfg.target_obj(), cfg.p, cfg.taus, **_sweep_args(cfg))
    write_csv(out / "lagrange.csv", HEADERS["lagrange"], _lagrange_rows(rep))
    res = _convergence_criteria(cfg, rep)
    if base.family is Family.BESSEL and -1.0 < base.nu < -0.5:
        oi = np.array([r.origin_integral for r in rep.records])
        res["origin_monotone"] = _crit(bool(np.all(np.diff(oi) < 0)), origin_integrals=oi)
        thr = cfg.criteria["origin_threshold"]
        if thr is not None:
            res["origin_threshold"] = _crit(oi[-1] < thr, final=oi[-1], limit=thr)
    return res


def exp_hermite(cfg: ExperimentConfig, out: Path) -> dict:
    base = cfg.system_obj()
    rep = run_hermite_convergence(base, cfg.target_obj(), cfg.p, cfg.taus, cfg.weight_mode, **_sweep_args(cfg))
    rows = [
        (r.tau, r.weighted_error, r.tail_budget, r.nodes_used, r.value_residual, r.derivative_residual, r.derivative_damping)
        for r in rep.records
    ]
    write_csv(out / "hermite.csv", HEADERS["hermite"], rows)
    res = _convergence_criteria(cfg, rep)
    vr = max(r.value_residual for r in rep.records)
    dr = max(r.derivative_residual for r in rep.records)
    res["node_conditions"] = _crit(vr <= 1e-9 and dr <= 1e-5, value_residual=vr, derivative_residual=dr)
    lo, hi = cfg.criteria["damping_range"]
    ratios = rep.damping_ratios
    res["derivative_damping"] = _crit(bool(np.all((ratios >= lo) & (ratios <= hi))), ratios=ratios, range=[lo, hi])
    return res


def exp_hbweight(cfg: ExperimentConfig, out: Path) -> dict:
    s = cfg.system
    rep = run_hbweight_convergence(s["w"], cfg.target_obj(), cfg.p, cfg.taus, tau0=s["tau0"], **_sweep_args(cfg))
    write_csv(out / "hbweight.csv", HEADERS["lagrange"], _lagrange_rows(rep))
    return _convergence_criteria(cfg, rep)


def exp_selftest(cfg: ExperimentConfig | None, out: Path | None) -> dict:
    res = {}
    for r in selftest.run_all():
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}  {r.detail}", flush=True)
        res[r.name] = _crit(r.ok, detail=r.detail)
    return res


DISPATCH = {
    "nodes": exp_nodes,
    "interp": exp_interp,
    "mz": exp_mz,
    "reproduce": exp_reproduce,
    "converge-lagrange": exp_lagrange,
    "converge-hermite": exp_hermite,
    "converge-hbweight": exp_hbweight,
    "selftest": exp_selftest,
}


# ------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="etype-interp", description="Interpolation series for Hermite-Biehler systems.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, metavar="<subcommand>")
    helps = {
        "run": "run the experiment named in the config",
        "nodes": "compute interpolation nodes",
        "interp": "evaluate a Lagrange series",
        "mz": "MZ ratio sweep over tau",
        "reproduce": "reproducing-identity check",
        "converge-lagrange": "Lagrange convergence sweep",
        "converge-hermite": "Hermite convergence sweep",
        "converge-hbweight": "Lagrange sweep on an E = W exp(-i(tau-tau0)z) system",
        "selftest": "run the invariant suite",
    }
    for name, h in helps.items():
        p = sub.add_parser(name, help=h, description=h)
        p.add_argument("--config", required=name not in ("selftest",), help="JSON config file")
        p.add_argument("--output", help="output directory (overrides the config)")
        p.add_argument("--workers", type=int, help="worker threads (overrides the config)")
        if name == "selftest":
            p.add_argument("--list", action="store_true", help="print invariant names and exit")
    return ap


def _setup_logging() -> None:
    level = os.environ.get("ETYPE_INTERP_LOG", "error").lower()
    if level not in LOG_LEVELS:
        print(f"warning: ETYPE_INTERP_LOG={level!r} not in {sorted(LOG_LEVELS)}; using 'error'", file=sys.stderr)
        level = "error"
    logging.basicConfig(level=LOG_LEVELS[level], stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    cmd = args.command
    try:
        if cmd == "selftest" and args.list:
            for n in selftest.names():
                print(n)
            return 0
        cfg = None
        if args.config:
            cfg = load(args.config, None if cmd == "run" else cmd)
            if args.workers is not None:
                if args.workers < 1:
                    raise EtypeError("--workers must be >= 1")
                cfg.workers = args.workers
            if args.output is not None:
                cfg.output = args.output
        out = Path(args.output or (cfg.output if cfg else "")) if (args.output or cfg) else None
        exp = cfg.experiment if cfg else "selftest"
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        results = DISPATCH[exp](cfg, out)
    except EtypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    ok = all(r["pass"] for r in results.values())
    if out is not None:
        summary = {
            "schema_version": SCHEMA_VERSION,
            "experiment": exp,
            "success": ok,
            "criteria": results,
        }
        if cfg is not None:
            summary["config"] = cfg.to_dict()
            summary["config"].pop("workers")
            summary["config"].pop("output")
        with open(out / "summary.json", "w") as fh:
            json.dump(_clean(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
    for name, r in results.items():
        if exp != "selftest":
            print(f"{'PASS' if r['pass'] else 'FAIL'}  {name}  {json.dumps(r['measured'], sort_keys=True)}")
    if not ok:
        first = next(n for n, r in results.items() if not r["pass"])
        kind = "invariant" if exp == "selftest" else "criterion"
        print(f"{exp}: {kind} '{first}' failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
