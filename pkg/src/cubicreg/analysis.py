"""Constants, complexity bounds and post-hoc checks of solver traces.

Notation: ``sigma`` is the uniform-convexity modulus of degree 2+nu and
``holder`` the Hoelder constant of the Hessian of degree nu.  Empirical
estimates are one-sided: a sampled infimum can only overestimate sigma and a
sampled supremum can only underestimate the Hoelder constant.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .normed_space import ContractViolation
from .oracles import BallIndicator, Problem, log_interpolate, residual_bound
from .solvers import Trace


# ---------------------------------------------------------------------------
# closed-form quantities
# ---------------------------------------------------------------------------

def condition_number(sigma: float, holder: float) -> float:
    """sigma_f(2+nu) / H_f(nu); 0 when holder is infinite, inf when holder is 0."""
    if math.isinf(holder):
        return 0.0
    if holder == 0.0:
        return math.inf
    return sigma / holder


def kappa(nu: float, sigma: float, holder: float) -> float:
    """Auxiliary constant governing the admissible H0 and the oracle-call bound."""
    a = 1.0 + nu
    b = 2.0 + nu
    if math.isinf(holder):
        return math.inf
    e_sigma = (1.0 - nu) / (a * b)
    if e_sigma > 0 and sigma == 0.0:
        return math.inf
    return (holder ** (2.0 / a) / sigma ** e_sigma
            * 6.0 * (8.0 + nu) ** ((1.0 - nu) / a) / (a * b) ** (2.0 / a)
            * (a / b) ** ((1.0 - nu) / b))


def fixed_nu_factor(gamma: float, nu: float, beta: float = 1.0) -> float:
    """Per-step gap contraction of the constant-H process with H <= beta H_f(nu)."""
    a, b = 1.0 + nu, 2.0 + nu
    inner = math.inf if math.isinf(gamma) else gamma * a / ((1.0 + beta) * b)
    return 1.0 - a / b * min(1.0, inner) ** (1.0 / a)


def _adaptive_rate(gamma: float, nu: float) -> float:
    a, b = 1.0 + nu, 2.0 + nu
    if math.isinf(gamma):
        return math.inf
    return (gamma ** (1.0 / a) * b / a * (a * b) ** (1.0 / a)
            / (6.0 ** 1.5 * 2.0 ** 0.5 * (8.0 + nu) ** ((1.0 - nu) / (2.0 + 2.0 * nu))))


def adaptive_factor(gamma: float, nu: float) -> float:
    """Per-step gap contraction of the adaptive cubic Newton method."""
    return 1.0 - min(_adaptive_rate(gamma, nu), 0.5)


def admissible_H0(kappa_value: float, gap0: float, nu: float) -> float:
    """Largest H0 for which the linear rate holds from the first iteration."""
    return kappa_value / gap0 ** ((1.0 - nu) / (2.0 + nu))


def oracle_calls_bound(K: float, kappa_value: float, epsilon: float, nu: float, H0: float) -> float:
    return 2.0 * K + math.log2(kappa_value / epsilon ** ((1.0 - nu) / (2.0 + nu))) - math.log2(H0)


def quadratic_iterations(H0: float, distance: float, epsilon: float) -> int:
    """Iterations sufficient for a convex quadratic from distance D to the minimizer."""
    return math.ceil(math.log2(H0 * distance ** 3 / (6.0 * epsilon)) + 1.0)


def progress_bound(gap_x: float, gap_T: float, H: float, sigma: float, holder: float,
                 nu: float) -> float:
    """Lower bound on F(x) - M*_H(x) from the two-case progress estimate."""
    a, b = 1.0 + nu, 2.0 + nu
    gamma = condition_number(sigma, holder)
    g_term = math.inf if math.isinf(gamma) else (gamma * a / (2.0 * b)) ** (1.0 / a)
    first = gap_x * a / b * min(g_term, 1.0)
    e = 3.0 * a / (2.0 * b)
    second = (max(gap_T, 0.0) ** e * (b / a) ** e * sigma ** (3.0 / (2.0 * b))
              / (3.0 * math.sqrt(H)))
    return min(first, second)


def increase_bounds(nu: float, holder: float) -> tuple[float, float]:
    """Right-hand sides bounding H r^{1-nu} and H ||F'||^{(1-nu)/(1+nu)} after a rejection."""
    a, b = 1.0 + nu, 2.0 + nu
    first = 6.0 * holder / (a * b)
    second = 6.0 * (8.0 + nu) ** ((1.0 - nu) / a) * (holder / (a * b)) ** (2.0 / a)
    return first, second


def interpolate_bounds(degrees, values, at: float, kind: str) -> float:
    """Geometric interpolation of two anchor constants.

    ``kind='sigma'`` gives a lower bound on sigma_f(at) (log-concavity),
    ``kind='holder'`` an upper bound on H_f(at) (log-convexity).  Degenerate
    anchors (zero or infinite) raise ContractViolation.
    """
    (d1, v1), (d2, v2) = sorted(zip(degrees, values))
    if kind not in ("sigma", "holder"):
        raise ContractViolation("kind must be 'sigma' or 'holder'")
    for v in (v1, v2):
        if not (0.0 < v < math.inf):
            raise ContractViolation(f"anchor value {v!r} makes the interpolated bound degenerate")
    return log_interpolate(d1, v1, d2, v2, at)


@dataclass
class Budgets:
    K_fixed: float
    K_adaptive: float
    N_bound: float
    K_quadratic: int | None
    H0_max: float
    K0_init: float
    gamma: float
    kappa: float
    flags: list = field(default_factory=list)


def theoretical_budgets(sigma: float, holder: float, gap0: float, epsilon: float, nu: float,
                        H0: float, beta: float = 1.0, distance: float | None = None) -> Budgets:
    """Evaluate the closed-form iteration and oracle-call bounds (natural log for 'log')."""
    if not (gap0 > epsilon > 0 and H0 > 0):
        raise ContractViolation("need gap0 > epsilon > 0 and H0 > 0")
    a, b = 1.0 + nu, 2.0 + nu
    flags = []
    gamma = condition_number(sigma, holder)
    kap = kappa(nu, sigma, holder)
    logratio = math.log(gap0 / epsilon)
    if gamma == 0.0:
        flags.append("gamma = 0: linear-rate bounds are infinite")
        K_fixed = K_adaptive = N = math.inf
    else:
        inner = 0.0 if math.isinf(gamma) else (1.0 + beta) * b / (gamma * a)
        K_fixed = math.ceil(b / a * max(inner, 1.0) ** (1.0 / a) * logratio)
        rate = _adaptive_rate(gamma, nu)
        K_adaptive = max(1.0 / rate, 1.0) * logratio
        N = oracle_calls_bound(K_adaptive, kap, epsilon, nu, H0) if 0 < kap < math.inf else math.inf
    if math.isinf(gamma):
        flags.append("Hoelder constant is 0 (quadratic): kappa = 0, use K_quadratic")
    K_quad = quadratic_iterations(H0, distance, epsilon) if distance is not None else None
    H0_max = admissible_H0(kap, gap0, nu)
    K0 = (math.ceil(math.log2(H0 * epsilon ** ((1.0 - nu) / a) / kap))
          if 0 < kap < math.inf else math.nan)
    return Budgets(K_fixed, K_adaptive, N, K_quad, H0_max, K0, gamma, kap, flags)


# ---------------------------------------------------------------------------
# sampling estimates
# ---------------------------------------------------------------------------

@dataclass
class PairSampler:
    """Deterministic pairs of distinct points in a box (or in the problem's ball domain)."""

    seed: int = 0
    n_pairs: int = 2000
    box: float = 10.0
    center: np.ndarray | None = None
    min_separation: float = 1e-6

    def pairs(self, problem: Problem):
        rng = np.random.default_rng(self.seed)
        n = problem.dimension
        h = problem.h
        c = np.zeros(n) if self.center is None else np.asarray(self.center, dtype=float)

        def draw():
            if isinstance(h, BallIndicator):
                u = rng.standard_normal(n)
                u *= h.radius * rng.random() ** (1.0 / n) / np.linalg.norm(u)
                return h.center + problem.metric.unwhiten_primal(u)
            return c + rng.uniform(-self.box, self.box, n)

        out = []
        while len(out) < self.n_pairs:
            x, y = draw(), draw()
            if problem.metric.primal_norm(x - y) >= self.min_separation:
                out.append((x, y))
        return out

    def describe(self, problem: Problem) -> dict:
        if isinstance(problem.h, BallIndicator):
            domain = {"type": "ball", "radius": problem.h.radius}
        else:
            domain = {"type": "box", "half_width": self.box, "restricted_to_box": True}
        return {"seed": self.seed, "n_pairs": self.n_pairs, "domain": domain}


@dataclass
class ConstantsEstimate:
    sigma_hat: dict
    holder_hat: dict
    gamma_free_hat: float
    gamma_free_defined: bool
    sampler: dict

    def to_dict(self):
        def enc(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {
            "sigma_hat": {repr(k): enc(v) for k, v in self.sigma_hat.items()},
            "holder_hat": {repr(k): enc(v) for k, v in self.holder_hat.items()},
            "gamma_free_hat": enc(self.gamma_free_hat),
            "gamma_free_defined": self.gamma_free_defined,
            "sampler": self.sampler,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)


def _pair_quantities(problem: Problem, x, y):
    f, m = problem.smooth, problem.metric
    d = x - y
    dist = m.primal_norm(d)
    inner = float((f.gradient(x) - f.gradient(y)) @ d)
    Hx, Hy = f.hessian(x), f.hessian(y)
    dH = 0.5 * ((Hx - Hy) + (Hx - Hy).T)
    return dist, inner, m.operator_norm(dH), Hx, Hy


def estimate_constants(problem: Problem, degrees=(2.0, 3.0), nus=(0.0, 0.5, 1.0),
                       sampler: PairSampler | None = None) -> ConstantsEstimate:
    """Sampled inf of the uniform-convexity ratio, sup of the Hessian Hoelder ratio,
    and inf of the degree-free ratio, all over one pair set."""
    sampler = sampler or PairSampler()
    sigma_hat = {float(p): math.inf for p in degrees}
    holder_hat = {float(v): 0.0 for v in nus}
    gamma_free = math.inf
    for x, y in sampler.pairs(problem):
        dist, inner, dnorm, _, _ = _pair_quantities(problem, x, y)
        for p in sigma_hat:
            sigma_hat[p] = min(sigma_hat[p], inner / dist ** p)
        for v in holder_hat:
            holder_hat[v] = max(holder_hat[v], dnorm / dist ** v)
        if dnorm > 0.0:
            gamma_free = min(gamma_free, inner / (dnorm * dist ** 2))
    return ConstantsEstimate(sigma_hat, holder_hat, gamma_free, math.isfinite(gamma_free),
                             sampler.describe(problem))


def gamma_upper_bound_check(problem: Problem, sampler: PairSampler, nu: float,
                            gamma: float | None = None, tol: float = 1e-9) -> dict:
    """Check gamma_f(nu) against 1/(1+nu) + inf ||Hess(x)|| / ||Hess(y) - Hess(x)||.

    ``gamma`` defaults to the certified value from the problem's known constants.
    Skipped when the Hessian is constant (gamma undefined).
    """
    if gamma is None:
        s, H = problem.known.sigma_at(2.0 + nu), problem.known.holder_at(nu)
        if s is None or H is None:
            raise ContractViolation(f"no certified constants of degree {nu} to check")
        gamma = condition_number(s, H)
    if problem.known.quadratic or math.isinf(gamma):
        return {"status": "skipped", "reason": "constant Hessian: gamma undefined"}
    m = problem.metric
    ratio = math.inf
    for x, y in sampler.pairs(problem):
        _, _, dnorm, Hx, _ = _pair_quantities(problem, x, y)
        if dnorm > 0.0:
            ratio = min(ratio, m.operator_norm(0.5 * (Hx + Hx.T)) / dnorm)
    sampled = 1.0 / (1.0 + nu) + ratio
    unbounded = 1.0 / (1.0 + nu) if (nu > 0 and not isinstance(problem.h, BallIndicator)) else None
    ok = gamma <= sampled + tol and (unbounded is None or gamma <= unbounded + tol)
    return {"status": "ok" if ok else "violated", "gamma": gamma, "sampled_bound": sampled,
            "unbounded_domain_bound": unbounded}


# ---------------------------------------------------------------------------
# trace verification
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    steps_checked: int = 0
    violations: list = field(default_factory=list)
    min_slack: float | None = None
    status: str = "ok"
    note: str = ""

    def add(self, step: int, lhs: float, rhs: float, scale: float):
        """Record ``lhs <= rhs`` at a step, up to roundoff at ``scale``."""
        self.steps_checked += 1
        slack = rhs - lhs
        self.min_slack = slack if self.min_slack is None else min(self.min_slack, slack)
        tol = 1e-9 * max(abs(lhs), abs(rhs)) + 1e-13 * scale
        if slack < -tol:
            self.violations.append({"step": step, "lhs": lhs, "rhs": rhs, "slack": slack})
            self.status = "violated"

    def to_dict(self):
        return {"name": self.name, "steps_checked": self.steps_checked,
                "violations": self.violations, "min_slack": self.min_slack,
                "status": self.status, "note": self.note}


@dataclass
class BoundReport:
    nu: float
    sigma: float
    holder: float
    checks: list

    @property
    def n_violations(self) -> int:
        return sum(len(c.violations) for c in self.checks)

    def check(self, name: str) -> CheckResult:
        return next(c for c in self.checks if c.name == name)

    def to_dict(self):
        return {"nu": self.nu, "sigma": self.sigma, "holder": self.holder,
                "n_violations": self.n_violations,
                "checks": [c.to_dict() for c in self.checks]}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> BoundReport:
        d = json.loads(text)
        checks = [CheckResult(**c) for c in d["checks"]]
        return cls(d["nu"], d["sigma"], d["holder"], checks)


_REQUIRED = ("F_k", "gap", "H_k")


def verify_trace(trace: Trace, sigma: float, holder: float, nu: float,
                 epsilon: float | None = None) -> BoundReport:
    """Check an adaptive-cubic trace against the per-step progress bounds.

    ``sigma`` is sigma_f(2+nu) and ``holder`` is H_f(nu), both certified.
    """
    if trace.F_star is None or trace.mode != "known_optimum":
        raise ContractViolation("trace verification needs a known_optimum trace")
    recs = trace.records
    for r in recs:
        for name in _REQUIRED:
            if getattr(r, name, None) is None:
                raise ContractViolation(f"record {r.k} lacks field {name}")
    eps = trace.config.get("epsilon") if epsilon is None else epsilon
    a, b = 1.0 + nu, 2.0 + nu
    gamma = condition_number(sigma, holder)
    kap = kappa(nu, sigma, holder)
    inc_r_rhs, inc_g_rhs = increase_bounds(nu, holder)

    progress = CheckResult("step_progress")
    increase = [CheckResult("increase_radius"), CheckResult("increase_subgradient"),
          CheckResult("increase_gap")]
    residual = CheckResult("residual_gap")
    contraction = CheckResult("linear_rate")
    p = 2.0 + nu

    for k, r in enumerate(recs):
        scale = 1.0 + abs(r.F_k)
        if r.subgrad_norm is not None and sigma > 0:
            residual.add(k, r.gap, residual_bound(r.subgrad_norm, sigma, p), scale)
        if r.i_k is None or k + 1 >= len(recs):
            continue
        nxt = recs[k + 1]
        progress.add(k, progress_bound(r.gap, nxt.gap, r.H_applied, sigma, holder, nu),
                      r.model_decrease, scale)
        if r.i_k > 0:
            H = r.H_applied / 2.0
            lhs_a = H * r.r_k ** (1.0 - nu)
            lhs_b = H * nxt.subgrad_norm ** ((1.0 - nu) / a)
            lhs_c = H * max(nxt.gap, 0.0) ** ((1.0 - nu) / b)
            increase[0].add(k, lhs_a, inc_r_rhs, scale)
            increase[1].add(k, lhs_b, inc_g_rhs, scale)
            increase[2].add(k, lhs_c, kap, scale)

    H0 = recs[0].H_k
    gap0 = recs[0].gap
    if gap0 <= 0 or not (0 < kap < math.inf) or H0 > admissible_H0(kap, gap0, nu):
        contraction.status = "skipped"
        contraction.note = "H0 exceeds the admissible initial level (or kappa degenerate)"
    else:
        factor = adaptive_factor(gamma, nu)
        skipped = 0
        for k, r in enumerate(recs[:-1]):
            if r.i_k is None:
                continue
            if eps is not None and r.min_trial_gap is not None and r.min_trial_gap < eps:
                skipped += 1
                continue
            contraction.add(k, recs[k + 1].gap, factor * r.gap, 1.0 + abs(r.F_k))
        if skipped:
            contraction.note = f"{skipped} step(s) skipped: a trial point was already within epsilon"

    if all(c.steps_checked == 0 for c in increase):
        for c in increase:
            c.status = "vacuous"
            c.note = "no step increased H (all i_k = 0)"
    return BoundReport(nu, sigma, holder, [progress, *increase, residual, contraction])
