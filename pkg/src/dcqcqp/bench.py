"""Benchmark runner producing a CSV in the layout of the published results table.

For every instance size the same seeded instances are solved by each
requested algorithm and the per-instance results are averaged into one row
per ``(m, algo)``.  The ``gap`` column means different things per algorithm:
for ``scobb`` it is the certified relative gap ``(upper - lower) /
max(1, |upper|)``; for ``sco`` it is the relative excess of the SCO value
over the SCOBB value on the same instance (``NA`` when SCOBB was not run).
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .bb import BbLimits, run_scobb
from .cutplane import run_cutplane
from .generate import generate_instance
from .liquidation import build_qcqp, check_optimality_activity
from .sco import DcInstance, run_sco
from .status import SolverFailure

log = logging.getLogger(__name__)

HEADER = ("m", "pi", "delta_frac", "algo", "opt_val", "time_s", "iters", "leverage_ratio", "gap")
ALGOS = ("scobb", "sco")


@dataclass(frozen=True)
class BenchConfig:
    ms: tuple = (10,)
    seeds: tuple = tuple(range(5))
    pi: float = 0.3
    delta_frac: float = 0.8
    rho1: float = 18.0
    rho2: float = 18.0
    eps: float = 1e-6
    algos: tuple = ALGOS
    gamma_ratio: float = 1.0
    max_nodes: int = 100_000
    time_limit: float | None = None
    deterministic: bool = True
    threads: int = 1


@dataclass
class BenchRow:
    m: int
    pi: float
    delta_frac: float
    algo: str
    opt_val: float
    time_s: float
    iters: float
    leverage_ratio: float
    gap: float
    seed: int | None = None
    status: str = ""
    extra: dict = field(default_factory=dict)


def _solve(p, algo: str, cfg: BenchConfig):
    dc = DcInstance.from_instance(build_qcqp(p))
    t0 = time.perf_counter()
    if algo == "scobb":
        rep = run_scobb(dc, liq=p, eps=cfg.eps, threads=cfg.threads,
                        limits=BbLimits(cfg.max_nodes, cfg.time_limit))
        return dict(value=rep.upper, y=rep.incumbent, iters=rep.nodes_processed, gap=rep.gap,
                    status=rep.status.kind.value, time=time.perf_counter() - t0)
    if algo == "sco":
        y0 = run_cutplane(p).feasible_point
        y, v, tr = run_sco(dc, y0, eps=cfg.eps)
        return dict(value=v, y=y, iters=tr.steps, gap=np.nan, status=tr.status.kind.value,
                    time=time.perf_counter() - t0)
    raise ValueError(f"unknown algorithm {algo!r}")


def run_benchmark(cfg: BenchConfig):
    """Returns ``(per_instance_rows, summary_rows)``."""
    for a in cfg.algos:
        if a not in ALGOS:
            raise ValueError(f"unknown algorithm {a!r}; expected one of {ALGOS}")
    per, summary = [], []
    for m in cfg.ms:
        results = {a: [] for a in cfg.algos}
        for seed in cfg.seeds:
            p = generate_instance(seed, m, cfg.pi, cfg.delta_frac, cfg.rho1, cfg.rho2, cfg.gamma_ratio)
            got = {}
            for algo in cfg.algos:
                try:
                    r = _solve(p, algo, cfg)
                    r["leverage"] = check_optimality_activity(p, r["y"]).leverage
                except (SolverFailure, ValueError, ArithmeticError) as exc:
                    log.warning("m=%d seed=%d %s failed: %s", m, seed, algo, exc)
                    r = dict(value=np.nan, y=None, iters=np.nan, gap=np.nan, leverage=np.nan,
                             status=f"error: {exc}", time=np.nan)
                got[algo] = r
            if "sco" in got and "scobb" in got:
                ref = got["scobb"]["value"]
                got["sco"]["gap"] = (got["sco"]["value"] - ref) / max(1.0, abs(ref))
            for algo in cfg.algos:
                r = got[algo]
                row = BenchRow(m, cfg.pi, cfg.delta_frac, algo, r["value"],
                               np.nan if cfg.deterministic else r["time"], r["iters"],
                               r["leverage"] if r["leverage"] is not None else np.nan, r["gap"],
                               seed, r["status"])
                per.append(row)
                results[algo].append(row)
        for algo in cfg.algos:
            rows = [r for r in results[algo] if np.isfinite(r.opt_val)]

            def mean(attr):
                vals = [getattr(r, attr) for r in rows]
                return float(np.mean(vals)) if vals and all(np.isfinite(vals)) else np.nan

            summary.append(BenchRow(m, cfg.pi, cfg.delta_frac, algo, mean("opt_val"), mean("time_s"),
                                    mean("iters"), mean("leverage_ratio"), mean("gap"), None,
                                    f"{len(rows)}/{len(results[algo])} solved"))
    return per, summary


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None or not np.isfinite(v):
        return "NA"
    return f"{v:.10g}"


def to_csv(rows, per_instance: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = HEADER + (("seed", "status") if per_instance else ())
    w.writerow(header)
    for r in rows:
        d = asdict(r)
        w.writerow([_fmt(d[k]) for k in header])
    return buf.getvalue()


def format_table(rows) -> str:
    cols = HEADER
    data = [[_fmt(getattr(r, c)) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in data)) if data else len(c) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in data]
    return "\n".join(lines)
