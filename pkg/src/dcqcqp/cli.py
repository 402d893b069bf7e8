"""``dcqcqp`` command-line interface.

Verbs: ``generate``, ``solve``, ``oracle``, ``bench`` and ``check``.  Exit
codes: 0 optimal, 1 usage or input error, 2 iteration/time limit,
3 infeasible, 4 numerical failure.  Progress logging follows the
``QCQP_LOG`` environment variable (``error``, ``info`` or ``debug``).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import instance_io
from .bb import BbLimits, run_scobb
from .bench import BenchConfig, format_table, run_benchmark, to_csv
from .core import is_feasible, max_violation
from .cutplane import run_cutplane
from .generate import GenerationError, generate_instance
from .liquidation import check_assumptions, check_optimality_activity, shock_capacity
from .oracle import brute_force_oracle
from .sco import DcInstance, find_feasible_point, run_sco
from .status import PreconditionError, SolverFailure, StatusKind

log = logging.getLogger("dcqcqp")

EXIT = {
    StatusKind.OPTIMAL: 0,
    StatusKind.ITER_LIMIT: 2,
    StatusKind.INFEASIBLE: 3,
    StatusKind.UNBOUNDED: 3,
    StatusKind.NUMERICAL_FAILURE: 4,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _setup_logging():
    level = os.environ.get("QCQP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise UsageError(f"QCQP_LOG must be one of {sorted(levels)}, got {level!r}")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x).__name__)


def _num(x):
    return float(x) if x is not None and np.isfinite(x) else None


def cmd_generate(a):
    p = generate_instance(a.seed, a.m, a.pi, a.delta_frac, a.rho1, a.rho2, a.gamma_ratio)
    prov = {"generator": "generate_instance", "seed": a.seed, "m": a.m, "pi": a.pi,
            "delta_frac": a.delta_frac, "rho1": a.rho1, "rho2": a.rho2, "gamma_ratio": a.gamma_ratio}
    text = instance_io.dumps(instance_io.InstanceFile(liquidation=p, provenance=prov))
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _progress(nodes, upper, lower, open_nodes):
    log.info("nodes=%d upper=%.10g lower=%.10g open=%d", nodes, upper, lower, open_nodes)


def _start_point(f: instance_io.InstanceFile, dc: DcInstance):
    if f.liquidation is not None:
        return run_cutplane(f.liquidation).feasible_point
    return find_feasible_point(dc)


def cmd_solve(a):
    f = instance_io.load_instance(a.instance)
    inst = f.to_qcqp()
    liq = f.liquidation
    out = {"algo": a.algo}
    if a.algo == "cutplane":
        if liq is None:
            raise UsageError("the cutting-plane method needs a liquidation instance")
        r = run_cutplane(liq, tol=a.eps)
        y = r.feasible_point
        out.update(status=r.status.kind.value, dual_value=r.dual_value, t1=r.t1, t2=r.t2,
                   iterations=r.iterations, y=y, value=inst.objective(y))
        kind = r.status.kind
    else:
        dc = DcInstance.from_instance(inst)
        if a.algo == "sco":
            y0 = _start_point(f, dc)
            y, v, tr = run_sco(dc, y0, eps=a.eps)
            out.update(status=tr.status.kind.value, value=v, y=y, iterations=tr.steps)
            kind = tr.status.kind
        else:
            rep = run_scobb(dc, liq=liq, eps=a.eps, threads=a.threads, callback=_progress,
                            limits=BbLimits(a.max_nodes, a.time_limit))
            out.update(status=rep.status.kind.value, message=rep.status.message, value=_num(rep.upper),
                       lower=_num(rep.lower), gap=_num(rep.gap), y=rep.incumbent,
                       nodes=rep.nodes_processed, sco_restarts=rep.sco_restarts)
            if not a.deterministic:
                out["wall_time"] = rep.wall_time
            kind = rep.status.kind
            y = rep.incumbent
    if liq is not None and y is not None:
        act = check_optimality_activity(liq, y)
        out["leverage_ratio"] = _num(act.leverage)
        out["second_leverage_active"] = act.active
    if y is not None:
        out["max_violation"] = max_violation(inst, y)
    _emit(out, a.output)
    return EXIT[kind]


def cmd_oracle(a):
    f = instance_io.load_instance(a.instance)
    r = brute_force_oracle(f.to_qcqp(), a.resolution, max_points=a.max_points, polish=not a.no_polish)
    _emit({"value": r.value, "y": r.y, "grid_value": r.grid_value, "error_bound": r.error_bound,
           "exactly_feasible": r.exactly_feasible, "polished": r.polished, "points": r.points}, a.output)
    return 0


def cmd_bench(a):
    cfg = BenchConfig(ms=tuple(a.m), seeds=tuple(range(a.seeds)), pi=a.pi, delta_frac=a.delta_frac,
                      rho1=a.rho, rho2=a.rho, eps=a.eps, algos=tuple(a.algos), gamma_ratio=a.gamma_ratio,
                      max_nodes=a.max_nodes, time_limit=a.time_limit, deterministic=a.deterministic,
                      threads=a.threads)
    per, summary = run_benchmark(cfg)
    Path(a.output).write_text(to_csv(summary))
    if a.per_instance:
        Path(a.per_instance).write_text(to_csv(per, per_instance=True))
    print(format_table(summary))
    return 0


def cmd_check(a):
    f = instance_io.load_instance(a.instance)
    out = {}
    if f.liquidation is not None:
        p = f.liquidation
        out["assumptions"] = check_assumptions(p).as_dict()
        try:
            dmax, closed = shock_capacity(p.replace(delta=0.0), method="auto")
            out["shock_capacity"] = {"delta_max": dmax, "closed_form_valid": closed,
                                     "delta_over_max": p.delta / dmax if dmax > 0 else None}
        except PreconditionError as exc:
            out["shock_capacity"] = {"error": str(exc)}
    inst = f.to_qcqp()
    dc = DcInstance.from_instance(inst)
    out["convex"] = dc.is_convex
    out["minus_norms"] = [sp.norm_minus for sp in dc.splits]
    if a.point is not None:
        y = np.array(json.loads(a.point), dtype=float)
        out["point_feasible"] = is_feasible(inst, y)
        if f.liquidation is not None:
            act = check_optimality_activity(f.liquidation, y)
            out["activity"] = {"signed_slack": act.signed_slack, "leverage_ratio": _num(act.leverage),
                               "active": act.active}
    _emit(out, a.output)
    rep = out.get("assumptions", {})
    ok = rep.get("overleveraged", True) and rep.get("half_sale_restores", True)
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="dcqcqp", description="DC-split QCQP solvers and the two-period liquidation model.")
    sub = ap.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a seeded liquidation instance as JSON")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--m", type=int, required=True, help="number of assets")
    g.add_argument("--pi", type=float, default=0.3)
    g.add_argument("--delta-frac", type=float, default=0.8)
    g.add_argument("--rho1", type=float, default=18.0)
    g.add_argument("--rho2", type=float, default=18.0)
    g.add_argument("--gamma-ratio", type=float, default=1.0,
                   help="permanent impact drawn below this multiple of temporary impact")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve an instance file")
    s.add_argument("instance")
    s.add_argument("--algo", choices=("cutplane", "sco", "scobb"), default="scobb")
    s.add_argument("--eps", type=float, default=1e-6)
    s.add_argument("--max-nodes", type=int, default=100_000)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--deterministic", action="store_true", help="omit timings from the output")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="grid search an instance with at most 4 variables")
    o.add_argument("instance")
    o.add_argument("--resolution", type=float, default=1e-3, help="grid step relative to each box edge")
    o.add_argument("--max-points", type=int, default=20_000_000)
    o.add_argument("--no-polish", action="store_true")
    o.add_argument("-o", "--output")
    o.set_defaults(func=cmd_oracle)

    b = sub.add_parser("bench", help="run the benchmark table")
    b.add_argument("--m", type=int, nargs="+", default=[10])
    b.add_argument("--seeds", type=int, default=5)
    b.add_argument("--pi", type=float, default=0.3)
    b.add_argument("--delta-frac", type=float, default=0.8)
    b.add_argument("--rho", type=float, default=18.0)
    b.add_argument("--eps", type=float, default=1e-6)
    b.add_argument("--algos", nargs="*", choices=("scobb", "sco"), default=["scobb", "sco"])
    b.add_argument("--gamma-ratio", type=float, default=1.0)
    b.add_argument("--max-nodes", type=int, default=100_000)
    b.add_argument("--time-limit", type=float)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--deterministic", action="store_true", help="write NA instead of timings")
    b.add_argument("-o", "--output", default="bench.csv")
    b.add_argument("--per-instance", help="also write per-instance rows to this CSV")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("check", help="assumption and activity report")
    c.add_argument("instance")
    c.add_argument("--point", help="JSON list of trades to test for feasibility and activity")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        _setup_logging()
        return a.func(a)
    except (UsageError, instance_io.InstanceFormatError, FileNotFoundError, GenerationError) as exc:
        print(f"dcqcqp {a.verb}: {exc}", file=sys.stderr)
        return 1
    except PreconditionError as exc:
        print(f"dcqcqp {a.verb}: precondition failed: {exc}", file=sys.stderr)
        return 1
    except SolverFailure as exc:
        print(f"dcqcqp {a.verb}: {exc}", file=sys.stderr)
        return EXIT.get(exc.status.kind, 4)


if __name__ == "__main__":
    sys.exit(main())
