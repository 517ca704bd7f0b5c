"""Command line runner: ``cubicreg {solve,verify,estimate,bench}``.

Problem files follow the schema in :mod:`cubicreg.descriptors`.  ``solve`` and
``bench`` also accept an experiment file::

    {"problem": {...descriptor...} | "path/relative/to/this/file.json",
     "solver": "adaptive_cubic" | "fixed_nu" | "gradient_descent",
     "config": {SolverConfig fields},
     "seed": 0,
     "out": "runs/name"}

Command-line flags override the experiment file.  ``--seed`` replaces the
descriptor's top-level seed; random fields that carry their own seed keep it.

Exit codes: 0 success, 1 solver failure, 2 bad input (malformed JSON, invalid
descriptor or arguments), 3 trace mode mismatch, 4 Lipschitz constant missing.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

from . import analysis
from .descriptors import DescriptorError, load_problem, read_json
from .normed_space import ContractViolation
from .oracles import ZeroPart
from .solvers import SOLVERS, AcceptanceViolation, SolverConfig, Trace

EXIT_OK, EXIT_SOLVER, EXIT_INPUT, EXIT_MODE, EXIT_NO_L = 0, 1, 2, 3, 4
BENCH_COLUMNS = ("solver", "K", "N_oracle", "final_gap", "wall_ms")


class CliError(Exception):
    def __init__(self, message, code=EXIT_INPUT):
        super().__init__(message)
        self.code = code


def _fmt(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def load_experiment(path, seed=None):
    """Return (problem, descriptor, experiment dict) for a problem or experiment file."""
    path = Path(path)
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise DescriptorError(f"{path}: top level must be a JSON object")
    if "problem" in doc:
        exp = doc
        desc = doc["problem"]
        if isinstance(desc, str):
            desc = read_json(path.parent / desc)
    else:
        exp, desc = {}, doc
    desc = dict(desc)
    seed = seed if seed is not None else exp.get("seed")
    if seed is not None:
        desc["seed"] = int(seed)
    return load_problem(desc), desc, exp


def _solver_config(exp: dict, args) -> SolverConfig:
    fields = dict(exp.get("config", {}))
    overrides = {"epsilon": args.eps, "H0": args.h0, "nu": args.nu,
                 "max_outer_iters": args.max_iters}
    fields.update({k: v for k, v in overrides.items() if v is not None})
    if args.no_timing:
        fields["record_time"] = False
    try:
        return SolverConfig(**fields)
    except TypeError as exc:
        raise CliError(f"bad solver config: {exc}") from exc


def _k_bound(problem, trace: Trace, cfg: SolverConfig):
    """Closed-form iteration budget for the run, when the constants allow one."""
    r0 = trace.records[0]
    if r0.gap is None or r0.gap <= cfg.epsilon:
        return None
    known = problem.known
    if known.quadratic and known.minimizer is not None:
        D = problem.metric.primal_norm(problem.default_x0() - known.minimizer)
        return analysis.quadratic_iterations(cfg.H0, D, cfg.epsilon)
    s, H = known.sigma_at(2.0 + cfg.nu), known.holder_at(cfg.nu)
    if s is None or H is None:
        return None
    b = analysis.theoretical_budgets(s, H, r0.gap, cfg.epsilon, cfg.nu, cfg.H0)
    return math.ceil(b.K_adaptive) if math.isfinite(b.K_adaptive) else None


def summary_line(trace: Trace, k_bound=None) -> str:
    parts = [f"{trace.solver}: status={trace.status}", f"K={trace.K}", f"N_K={trace.N_K}",
             f"final_gap={_fmt(trace.final_gap) or 'n/a'}"]
    if k_bound is not None:
        parts.append(f"K_bound={k_bound}")
    return " ".join(parts)


# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    problem, desc, exp = load_experiment(args.config, args.seed)
    cfg = _solver_config(exp, args)
    solver = args.solver or exp.get("solver", "adaptive_cubic")
    if solver not in SOLVERS:
        raise CliError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}")
    try:
        trace = SOLVERS[solver](problem, cfg, descriptor=desc)
    except AcceptanceViolation as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = Path(args.out or exp.get("out", "trace"))
    out.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{out}.json").write_text(trace.to_json())
    Path(f"{out}.csv").write_text(trace.to_csv())
    print(summary_line(trace, _k_bound(problem, trace, cfg)))
    if trace.status != "converged":
        print(f"solver failure: {trace.status} {trace.message}".rstrip(), file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        trace = Trace.from_json(Path(args.trace).read_text())
    except (KeyError, TypeError) as exc:
        raise CliError(f"{args.trace}: not a trace file ({exc!r})") from exc
    if trace.mode != "known_optimum" or trace.F_star is None:
        print(f"mode mismatch: trace was recorded in {trace.mode!r} mode; "
              "verification needs known_optimum", file=sys.stderr)
        return EXIT_MODE
    if trace.solver != "adaptive_cubic":
        print(f"mode mismatch: verification applies to adaptive_cubic traces, got {trace.solver!r}",
              file=sys.stderr)
        return EXIT_MODE
    problem, desc, exp = load_experiment(args.problem)
    known = problem.known
    nu = args.nu if args.nu is not None else exp.get("verify_nu")
    if nu is None:
        nu = 0.0 if known.quadratic else float(trace.config.get("nu", 1.0))
    sigma = args.sigma if args.sigma is not None else known.sigma_at(2.0 + nu)
    holder = args.holder if args.holder is not None else known.holder_at(nu)
    if sigma is None or holder is None:
        raise CliError(f"no certified sigma({2 + nu:g}) / H({nu:g}); pass --sigma and --holder")
    report = analysis.verify_trace(trace, sigma, holder, nu, args.eps)
    text = report.to_json()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    for c in report.checks:
        line = f"{c.name}: {c.status} steps={c.steps_checked} violations={len(c.violations)}"
        print(line + (f" ({c.note})" if c.note else ""))
    print(f"violations={report.n_violations}")
    return EXIT_OK if report.n_violations == 0 else EXIT_SOLVER


def cmd_estimate(args) -> int:
    problem, _, _ = load_experiment(args.problem)
    sampler = analysis.PairSampler(seed=args.seed, n_pairs=args.pairs, box=args.box)
    est = analysis.estimate_constants(problem, _floats(args.degrees), _floats(args.nus), sampler)
    text = est.to_json()
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


def bench_rows(problem, desc, cfg: SolverConfig):
    rows, traces = [], {}
    for name in ("gradient_descent", "adaptive_cubic"):
        t0 = time.perf_counter()
        trace = SOLVERS[name](problem, cfg, descriptor=desc)
        wall = 1e3 * (time.perf_counter() - t0) if cfg.record_time else 0.0
        rows.append((name, trace.K, trace.N_K, trace.final_gap, round(wall, 3)))
        traces[name] = trace
    return rows, traces


def bench_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for name, K, N, gap, wall in rows:
        w.writerow([name, K, N, _fmt(gap), _fmt(wall)])
    return buf.getvalue()


def cmd_bench(args) -> int:
    problem, desc, exp = load_experiment(args.config, args.seed)
    if problem.known.lipschitz_gradient is None:
        print("bench needs a known Lipschitz constant of the gradient (known.lipschitz_gradient)",
              file=sys.stderr)
        return EXIT_NO_L
    if not isinstance(problem.h, ZeroPart):
        raise CliError("bench compares unconstrained solvers; the problem must have h = 0")
    cfg = _solver_config(exp, args)
    rows, traces = bench_rows(problem, desc, cfg)
    text = bench_csv(rows)
    out = args.out or exp.get("bench_out")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    sys.stdout.write(text)
    failed = [n for n, t in traces.items() if t.status != "converged"]
    if failed:
        for n in failed:
            print(f"solver failure: {n} ended with {traces[n].status}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


# ---------------------------------------------------------------------------

def _run_flags(p):
    p.add_argument("--seed", type=int, help="replaces the descriptor's top-level seed")
    p.add_argument("--eps", type=float, help="target accuracy epsilon")
    p.add_argument("--h0", type=float, help="initial regularization level H0")
    p.add_argument("--nu", type=float, help="Hoelder degree of the model")
    p.add_argument("--max-iters", type=int, help="outer iteration cap")
    p.add_argument("--no-timing", action="store_true", help="write 0 for wall-clock columns")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cubicreg", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run a solver and write trace JSON + CSV")
    p.add_argument("config", help="problem descriptor or experiment file")
    p.add_argument("--solver", choices=sorted(SOLVERS))
    p.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.csv")
    _run_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="check a trace against the per-step bounds")
    p.add_argument("trace")
    p.add_argument("problem")
    p.add_argument("--nu", type=float, help="analysis degree (default: the experiment's "
                                             "verify_nu, 0 for quadratics, else the trace's nu)")
    p.add_argument("--sigma", type=float, help="override the certified sigma(2+nu)")
    p.add_argument("--holder", type=float, help="override the certified H(nu)")
    p.add_argument("--eps", type=float, help="epsilon for skipping steps (default: trace's)")
    p.add_argument("--out", help="report JSON path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("estimate", help="sample uniform-convexity and Hoelder constants")
    p.add_argument("problem")
    p.add_argument("--degrees", default="2,3")
    p.add_argument("--nus", default="0,0.5,1")
    p.add_argument("--pairs", type=int, default=2000)
    p.add_argument("--box", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="gradient descent vs adaptive cubic Newton")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path")
    _run_flags(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, DescriptorError, ContractViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "code", EXIT_INPUT)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
