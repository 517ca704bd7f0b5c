"""Outer iterations: adaptive cubic Newton, fixed-degree regularized Newton, gradient descent.

Every solver returns a :class:`Trace` with one :class:`IterationRecord` per iterate
x_0, ..., x_K.  Record k holds the state at x_k and, unless it is the terminal
record, the step taken from x_k.  ``N_k`` counts oracle calls spent before x_k.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .normed_space import ContractViolation
from .oracles import Problem, ZeroPart, residual_bound
from .subproblem import SubproblemError, SubproblemSettings, new_point_subgradient, solve_model

log = logging.getLogger(__name__)

H_FLOOR = 1e-300
STOP_MODES = ("known_optimum", "subgradient_bound")
CSV_COLUMNS = ("k", "H_k", "i_k", "F_k", "gap", "r_k", "subgrad_norm", "N_k", "ms")


class AcceptanceViolation(RuntimeError):
    """F(x_{k+1}) exceeded the model minimum in the fixed-degree process."""

    def __init__(self, step, F_new, model_min):
        super().__init__(f"step {step}: F(T) = {F_new!r} > model minimum {model_min!r}; "
                         "the regularization level is below the true Hoelder constant")
        self.step = step


@dataclass
class SolverConfig:
    H0: float = 1.0
    epsilon: float = 1e-6
    max_outer_iters: int = 10000
    max_inner_doublings: int = 60
    nu: float = 1.0
    H: float | None = None  # fixed-degree solver; defaults to the known Hoelder constant
    stop_mode: str = "known_optimum"
    sigma: float | None = None  # (sigma, p) for the subgradient_bound stop test
    p: float | None = None
    accept_rtol: float = 1e-13
    record_time: bool = True
    subproblem: SubproblemSettings = field(default_factory=SubproblemSettings)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractViolation("epsilon must be positive")
        if not self.H0 > 0:
            raise ContractViolation("H0 must be positive")
        if self.stop_mode not in STOP_MODES:
            raise ContractViolation(f"stop_mode must be one of {STOP_MODES}")
        if isinstance(self.subproblem, dict):
            self.subproblem = SubproblemSettings(**self.subproblem)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class IterationRecord:
    k: int
    H_k: float
    F_k: float
    gap: float | None
    subgrad_norm: float | None
    N_k: int
    ms: float = 0.0
    # step from x_k; None on the terminal record
    i_k: int | None = None
    H_applied: float | None = None
    r_k: float | None = None
    lam: float | None = None
    model_min: float | None = None
    model_decrease: float | None = None
    stationarity: float | None = None
    rejected_H: float | None = None
    rejected_F: float | None = None
    rejected_model_min: float | None = None
    min_trial_gap: float | None = None
    stopped_mid_search: bool = False


@dataclass
class Trace:
    solver: str
    problem_hash: str
    config: dict
    records: list = field(default_factory=list)
    status: str = "running"
    F_star: float | None = None
    x_final: list | None = None
    message: str = ""

    @property
    def K(self) -> int:
        """Number of steps taken."""
        return len(self.records) - 1

    @property
    def N_K(self) -> int:
        return self.records[-1].N_k

    @property
    def gaps(self) -> list:
        return [r.gap for r in self.records]

    @property
    def final_gap(self):
        return self.records[-1].gap

    @property
    def mode(self) -> str:
        return self.config.get("stop_mode", "known_optimum")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "problem_hash": self.problem_hash,
            "config": self.config,
            "status": self.status,
            "F_star": self.F_star,
            "x_final": self.x_final,
            "message": self.message,
            "records": [dataclasses.asdict(r) for r in self.records],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False, default=_json_default)

    @classmethod
    def from_dict(cls, d: dict) -> Trace:
        d = dict(d)
        records = [IterationRecord(**r) for r in d.pop("records")]
        return cls(records=records, **d)

    @classmethod
    def from_json(cls, text: str) -> Trace:
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.records:
            w.writerow([r.k, _fmt(r.H_k), "" if r.i_k is None else r.i_k, _fmt(r.F_k),
                        _fmt(r.gap), _fmt(r.r_k), _fmt(r.subgrad_norm), r.N_k, _fmt(r.ms)])
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    return format(float(v), ".17g")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def problem_hash(problem: Problem, descriptor: dict | None = None) -> str:
    if descriptor is not None:
        text = json.dumps(descriptor, sort_keys=True)
    else:
        text = problem.name
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------

class _Run:
    """Bookkeeping shared by the three solvers."""

    def __init__(self, problem: Problem, config: SolverConfig, solver: str, descriptor=None):
        self.problem = problem
        self.config = config
        self.F_star = problem.known.F_star
        if config.stop_mode == "known_optimum" and self.F_star is None:
            raise ContractViolation("stop_mode 'known_optimum' needs a known optimal value F*")
        if config.stop_mode == "subgradient_bound" and (config.sigma is None or config.p is None):
            raise ContractViolation("stop_mode 'subgradient_bound' needs sigma and p")
        cfg = config.to_dict()
        self.trace = Trace(solver, problem_hash(problem, descriptor), cfg,
                           F_star=self.F_star if config.stop_mode == "known_optimum" else None)
        self.t0 = time.perf_counter()

    def gap(self, F):
        return None if self.trace.F_star is None else F - self.trace.F_star

    def ms(self):
        if not self.config.record_time:
            return 0.0
        return round(1e3 * (time.perf_counter() - self.t0), 3)

    def converged(self, F, subgrad_norm) -> bool:
        cfg = self.config
        if cfg.stop_mode == "known_optimum":
            return F - self.F_star <= cfg.epsilon
        return residual_bound(subgrad_norm, cfg.sigma, cfg.p) <= cfg.epsilon

    def finish(self, x, status, message=""):
        self.trace.status = status
        self.trace.x_final = np.asarray(x, dtype=float).tolist()
        self.trace.message = message
        if message:
            log.info("%s: %s", status, message)
        return self.trace


def _start(problem: Problem, x0):
    x = problem.default_x0() if x0 is None else np.array(x0, dtype=float)
    if not problem.in_domain(x):
        raise ContractViolation("starting point is outside dom F")
    return x


def adaptive_cubic_newton(problem: Problem, config: SolverConfig, x0=None,
                          descriptor: dict | None = None) -> Trace:
    """Cubic regularization of Newton's method with the doubling/halving rule for H.

    At x_k the level H_k 2^i, i = 0, 1, ..., is tried until the new point does
    not exceed the model minimum; then ``H_{k+1} = 2^{i_k - 1} H_k``.  In
    known_optimum mode a rejected trial point that already meets the target
    accuracy ends the run.
    """
    run = _Run(problem, config, "adaptive_cubic", descriptor)
    x = _start(problem, x0)
    H = float(config.H0)
    F = problem.F(x)
    subgrad = problem.metric.dual_norm(problem.min_norm_subgradient(x))
    calls = 0
    for k in range(config.max_outer_iters + 1):
        rec = IterationRecord(k=k, H_k=H, F_k=F, gap=run.gap(F), subgrad_norm=subgrad, N_k=calls)
        run.trace.records.append(rec)
        if run.converged(F, subgrad):
            rec.ms = run.ms()
            return run.finish(x, "converged")
        if k == config.max_outer_iters:
            rec.ms = run.ms()
            return run.finish(x, "iteration_cap")

        last_rejected = None
        min_trial_gap = math.inf
        for i in range(config.max_inner_doublings + 1):
            H_try = H * 2.0 ** i
            try:
                sol = solve_model(problem, x, H_try, 1.0, config.subproblem)
            except SubproblemError as exc:
                rec.ms = run.ms()
                return run.finish(x, "subproblem_failure", f"step {k}, H={H_try!r}: {exc}")
            calls += 1
            F_T = problem.F(sol.T)
            gap_T = run.gap(F_T)
            if gap_T is not None:
                min_trial_gap = min(min_trial_gap, gap_T)
            tol = config.accept_rtol * max(abs(F), abs(F_T), abs(sol.model_min), 1e-300)
            accepted = F_T <= sol.model_min + tol
            stop_here = (not accepted and config.stop_mode == "known_optimum"
                         and gap_T <= config.epsilon)
            if accepted or stop_here:
                break
            last_rejected = (H_try, F_T, sol.model_min)
        else:
            rec.ms = run.ms()
            return run.finish(x, "subproblem_failure",
                              f"step {k}: no acceptable H after {config.max_inner_doublings} "
                              "doublings (oracle not convex or tolerance issue)")

        rec.i_k = i
        rec.H_applied = H_try
        rec.r_k = sol.r
        rec.lam = sol.lam
        rec.model_min = sol.model_min
        rec.model_decrease = sol.model_decrease
        rec.stationarity = sol.stationarity_residual
        rec.stopped_mid_search = bool(stop_here)
        rec.min_trial_gap = None if math.isinf(min_trial_gap) else min_trial_gap
        if last_rejected is not None:
            rec.rejected_H, rec.rejected_F, rec.rejected_model_min = last_rejected
        rec.ms = run.ms()

        _, subgrad = new_point_subgradient(problem, sol)
        x, F = sol.T, F_T
        H = H * 2.0 ** (i - 1)
        if H < H_FLOOR:
            log.warning("H_k underflow at step %d; floored at %g", k, H_FLOOR)
            H = H_FLOOR
    raise AssertionError("unreachable")


def fixed_nu_newton(problem: Problem, config: SolverConfig, x0=None,
                    descriptor: dict | None = None, beta: float = 1.0) -> Trace:
    """Regularized Newton process with the (2+nu)-model and constant H.

    H is ``config.H`` when given, otherwise ``beta`` times the certified Hoelder
    constant of degree ``config.nu``.  Raises :class:`AcceptanceViolation` when a
    step lands above the model minimum.
    """
    nu = config.nu
    H = config.H
    if H is None:
        Hf = problem.known.holder_at(nu)
        if Hf is None:
            raise ContractViolation(f"no Hoelder constant of degree {nu} known; pass H explicitly")
        H = beta * Hf
    if not H > 0:
        raise ContractViolation(f"regularization level must be positive, got {H}")
    run = _Run(problem, config, "fixed_nu", descriptor)
    run.trace.config["H"] = H
    x = _start(problem, x0)
    F = problem.F(x)
    subgrad = problem.metric.dual_norm(problem.min_norm_subgradient(x))
    calls = 0
    for k in range(config.max_outer_iters + 1):
        rec = IterationRecord(k=k, H_k=H, F_k=F, gap=run.gap(F), subgrad_norm=subgrad, N_k=calls)
        run.trace.records.append(rec)
        if run.converged(F, subgrad):
            rec.ms = run.ms()
            return run.finish(x, "converged")
        if k == config.max_outer_iters:
            rec.ms = run.ms()
            return run.finish(x, "iteration_cap")
        try:
            sol = solve_model(problem, x, H, nu, config.subproblem)
        except SubproblemError as exc:
            rec.ms = run.ms()
            return run.finish(x, "subproblem_failure", f"step {k}: {exc}")
        calls += 1
        F_T = problem.F(sol.T)
        tol = config.accept_rtol * max(abs(F), abs(F_T), abs(sol.model_min), 1e-300)
        if F_T > sol.model_min + tol:
            raise AcceptanceViolation(k, F_T, sol.model_min)
        rec.i_k = 0
        rec.H_applied = H
        rec.r_k = sol.r
        rec.lam = sol.lam
        rec.model_min = sol.model_min
        rec.model_decrease = sol.model_decrease
        rec.stationarity = sol.stationarity_residual
        rec.ms = run.ms()
        _, subgrad = new_point_subgradient(problem, sol)
        x, F = sol.T, F_T
    raise AssertionError("unreachable")


def gradient_descent(problem: Problem, config: SolverConfig, x0=None,
                     descriptor: dict | None = None) -> Trace:
    """x_{k+1} = x_k - B^{-1} grad f(x_k) / L, one gradient call per step."""
    L = problem.known.lipschitz_gradient
    if L is None:
        raise ContractViolation("gradient descent needs a known Lipschitz constant of the gradient")
    if not isinstance(problem.h, ZeroPart):
        raise ContractViolation("gradient descent supports h = 0 only")
    run = _Run(problem, config, "gradient_descent", descriptor)
    metric, f = problem.metric, problem.smooth
    x = _start(problem, x0)
    F = f.value(x)
    g = f.gradient(x)
    calls = 1
    for k in range(config.max_outer_iters + 1):
        gnorm = metric.dual_norm(g)
        rec = IterationRecord(k=k, H_k=L, F_k=F, gap=run.gap(F), subgrad_norm=gnorm, N_k=calls - 1)
        run.trace.records.append(rec)
        if gnorm == 0.0 or run.converged(F, gnorm):
            rec.ms = run.ms()
            return run.finish(x, "converged")
        if k == config.max_outer_iters:
            rec.ms = run.ms()
            return run.finish(x, "iteration_cap")
        step = metric.to_primal(g) / L
        rec.i_k = 0
        rec.H_applied = L
        rec.r_k = metric.primal_norm(step)
        rec.ms = run.ms()
        x = x - step
        F = f.value(x)
        g = f.gradient(x)
        calls += 1
    raise AssertionError("unreachable")


SOLVERS = {
    "adaptive_cubic": adaptive_cubic_newton,
    "fixed_nu": fixed_nu_newton,
    "gradient_descent": gradient_descent,
}
