"""Smooth oracles, simple composite parts and test problems with known constants.

Every oracle counts its own calls.  Test problems carry a :class:`KnownConstants`
record whose entries are certified one-sided bounds: uniform-convexity moduli
``sigma[p]`` are lower bounds and Hessian Hoelder constants ``holder[nu]`` are
upper bounds, each over the whole domain.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .normed_space import ContractViolation, MetricOperator, symmetrize

_KEY_DIGITS = 12


def _key(a: float) -> float:
    return round(float(a), _KEY_DIGITS)


def log_interpolate(a1: float, v1: float, a2: float, v2: float, a: float) -> float:
    """Geometric interpolation ``v1^{(a2-a)/(a2-a1)} * v2^{(a-a1)/(a2-a1)}``.

    This is the bound implied by log-concavity of the uniform-convexity
    moduli (a lower bound) and by log-convexity of the Hoelder constants
    (an upper bound).
    """
    if not a1 <= a <= a2 or a1 == a2:
        raise ContractViolation(f"degree {a} is not inside [{a1}, {a2}]")
    t = (a - a1) / (a2 - a1)
    if t == 0.0:
        return float(v1)
    if t == 1.0:
        return float(v2)
    return float(v1 ** (1.0 - t) * v2 ** t)


# ---------------------------------------------------------------------------
# smooth part
# ---------------------------------------------------------------------------

class SmoothOracle:
    """Base class: value / gradient / hessian with call counters.

    Subclasses implement ``_value``, ``_gradient`` and ``_hessian``.
    """

    name = "smooth"

    def __init__(self, dimension: int):
        self.dimension = int(dimension)
        self._lock = threading.Lock()
        self.n_value = 0
        self.n_gradient = 0
        self.n_hessian = 0

    def _bump(self, which: str):
        with self._lock:
            setattr(self, which, getattr(self, which) + 1)

    def _arg(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ContractViolation(f"point has shape {x.shape}, expected ({self.dimension},)")
        return x

    def value(self, x) -> float:
        self._bump("n_value")
        return float(self._value(self._arg(x)))

    def gradient(self, x) -> np.ndarray:
        self._bump("n_gradient")
        return self._gradient(self._arg(x))

    def hessian(self, x) -> np.ndarray:
        self._bump("n_hessian")
        return self._hessian(self._arg(x))

    @property
    def counters(self) -> tuple[int, int, int]:
        return (self.n_value, self.n_gradient, self.n_hessian)

    def reset_counters(self):
        with self._lock:
            self.n_value = self.n_gradient = self.n_hessian = 0


class PoweredNormOracle(SmoothOracle):
    """f(x) = ||x - center||^p / p in the B-norm."""

    name = "powered_norm"

    def __init__(self, p: float, center, metric: MetricOperator):
        super().__init__(metric.dimension)
        if p < 1:
            raise ContractViolation(f"powered norm needs p >= 1, got {p}")
        self.p = float(p)
        self.center = np.array(center, dtype=float)
        self.metric = metric

    def _value(self, x):
        return self.metric.primal_norm(x - self.center) ** self.p / self.p

    def _gradient(self, x):
        d = x - self.center
        t = self.metric.primal_norm(d)
        if t == 0.0:
            return np.zeros_like(d)
        return t ** (self.p - 2.0) * (self.metric.B @ d)

    def _hessian(self, x):
        d = x - self.center
        t = self.metric.primal_norm(d)
        B = self.metric.B
        if t == 0.0:
            if self.p == 2.0:
                return B.copy()
            if self.p > 2.0:
                return np.zeros_like(B)
            raise ContractViolation(f"Hessian of the powered norm with p={self.p} < 2 "
                                    "is unbounded at its center")
        Bd = B @ d
        return t ** (self.p - 2.0) * B + (self.p - 2.0) * t ** (self.p - 4.0) * np.outer(Bd, Bd)


class QuadraticOracle(SmoothOracle):
    """f(x) = <Ax, x>/2 - <b, x>."""

    name = "quadratic"

    def __init__(self, A, b):
        A = symmetrize(A, "quadratic operator")
        super().__init__(A.shape[0])
        self.A = A
        self.b = np.zeros(self.dimension) if b is None else np.array(b, dtype=float)
        if self.b.shape != (self.dimension,):
            raise ContractViolation("linear term does not match the quadratic's dimension")

    def _value(self, x):
        return 0.5 * x @ self.A @ x - self.b @ x

    def _gradient(self, x):
        return self.A @ x - self.b

    def _hessian(self, x):
        return self.A.copy()


class LogSumExpOracle(SmoothOracle):
    """f(x) = ln(sum_i exp(<a_i, x>)), rows of ``a`` are the a_i."""

    name = "logsumexp"

    def __init__(self, a):
        a = np.array(a, dtype=float)
        if a.ndim != 2:
            raise ContractViolation("logsumexp needs a 2-D array of rows a_i")
        super().__init__(a.shape[1])
        self.a = a

    def _weights(self, x):
        z = self.a @ x
        w = np.exp(z - z.max())
        return w / w.sum()

    def _value(self, x):
        return logsumexp(self.a @ x)

    def _gradient(self, x):
        return self.a.T @ self._weights(x)

    def _hessian(self, x):
        w = self._weights(x)
        g = self.a.T @ w
        H = (self.a.T * w) @ self.a - np.outer(g, g)
        return 0.5 * (H + H.T)


class SumOracle(SmoothOracle):
    """Nonnegative weighted sum of oracles of equal dimension."""

    name = "sum"

    def __init__(self, terms, weights):
        terms = list(terms)
        if not terms:
            raise ContractViolation("sum needs at least one term")
        super().__init__(terms[0].dimension)
        if any(t.dimension != self.dimension for t in terms):
            raise ContractViolation("all summands must have the same dimension")
        weights = [float(w) for w in weights]
        if len(weights) != len(terms) or any(w < 0 for w in weights) or not any(weights):
            raise ContractViolation("weights must be nonnegative, one per term, not all zero")
        self.terms = terms
        self.weights = weights

    def _active(self):
        return [(w, t) for w, t in zip(self.weights, self.terms) if w != 0.0]

    def _value(self, x):
        return sum(w * t.value(x) for w, t in self._active())

    def _gradient(self, x):
        return sum(w * t.gradient(x) for w, t in self._active())

    def _hessian(self, x):
        return sum(w * t.hessian(x) for w, t in self._active())


# ---------------------------------------------------------------------------
# composite part
# ---------------------------------------------------------------------------

class ZeroPart:
    kind = "zero"

    def value(self, y) -> float:
        return 0.0

    def contains(self, y) -> bool:
        return True

    def min_norm_subgradient(self, grad, y, metric: MetricOperator) -> np.ndarray:
        return np.asarray(grad, dtype=float)

    def to_dict(self):
        return {"type": "zero"}


@dataclass(frozen=True, eq=False)
class BallIndicator:
    """Indicator of the closed B-norm ball ``||y - center|| <= radius``.

    Membership allows a relative slack of ``rtol`` so that points projected
    onto the sphere in floating point still count as feasible.
    """

    center: np.ndarray
    radius: float
    metric: MetricOperator
    rtol: float = 1e-10
    kind = "ball"

    def __post_init__(self):
        if not self.radius > 0:
            raise ContractViolation(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", np.array(self.center, dtype=float))

    def distance_from_center(self, y) -> float:
        return self.metric.primal_norm(np.asarray(y, dtype=float) - self.center)

    def contains(self, y) -> bool:
        return self.distance_from_center(y) <= self.radius * (1.0 + self.rtol)

    def value(self, y) -> float:
        return 0.0 if self.contains(y) else math.inf

    def project(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        t = self.distance_from_center(y)
        if t <= self.radius:
            return y.copy()
        return self.center + (self.radius / t) * (y - self.center)

    def on_boundary(self, y, rtol: float = 1e-9) -> bool:
        return self.distance_from_center(y) >= self.radius * (1.0 - rtol)

    def min_norm_subgradient(self, grad, y, metric: MetricOperator) -> np.ndarray:
        """Element of ``grad + normal_cone(y)`` with the smallest dual norm."""
        grad = np.asarray(grad, dtype=float)
        if not self.on_boundary(y):
            return grad
        n = metric.to_dual(np.asarray(y, dtype=float) - self.center)
        gw, nw = metric.whiten_dual(grad), metric.whiten_dual(n)
        t = max(0.0, -float(gw @ nw) / float(nw @ nw))
        return grad + t * n

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


# ---------------------------------------------------------------------------
# problems
# ---------------------------------------------------------------------------

@dataclass
class KnownConstants:
    """Certified constants of a problem; any entry may be missing.

    ``sigma[p]`` lower-bounds the uniform-convexity modulus of degree p and
    ``holder[nu]`` upper-bounds the Hoelder constant of the Hessian of degree nu.
    ``quadratic`` marks a constant Hessian, so that every Hoelder constant is 0.
    """

    sigma: dict = field(default_factory=dict)
    holder: dict = field(default_factory=dict)
    minimizer: np.ndarray | None = None
    F_star: float | None = None
    lipschitz_gradient: float | None = None
    strong_convexity: float | None = None
    quadratic: bool = False

    def __post_init__(self):
        self.sigma = {_key(k): float(v) for k, v in self.sigma.items()}
        self.holder = {_key(k): float(v) for k, v in self.holder.items()}
        if self.minimizer is not None:
            self.minimizer = np.array(self.minimizer, dtype=float)

    def sigma_at(self, p: float) -> float | None:
        """Certified lower bound on sigma_f(p), interpolating between anchors."""
        return self._lookup(self.sigma, p)

    def holder_at(self, nu: float) -> float | None:
        """Certified upper bound on H_f(nu), interpolating between anchors."""
        if self.quadratic:
            return 0.0
        return self._lookup(self.holder, nu)

    @staticmethod
    def _lookup(table: dict, a: float) -> float | None:
        k = _key(a)
        if k in table:
            return table[k]
        below = [d for d in table if d < k]
        above = [d for d in table if d > k]
        if not below or not above:
            return None
        a1, a2 = max(below), min(above)
        return log_interpolate(a1, table[a1], a2, table[a2], k)

    def to_dict(self) -> dict:
        out = {
            "sigma": {repr(k): v for k, v in self.sigma.items()},
            "holder": {repr(k): v for k, v in self.holder.items()},
            "quadratic": self.quadratic,
        }
        if self.minimizer is not None:
            out["minimizer"] = self.minimizer.tolist()
        for name in ("F_star", "lipschitz_gradient", "strong_convexity"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        return out


@dataclass(eq=False)
class Problem:
    """Composite problem F = f + h with geometry and (optional) known constants."""

    smooth: SmoothOracle
    h: ZeroPart | BallIndicator
    metric: MetricOperator
    known: KnownConstants = field(default_factory=KnownConstants)
    x0: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.smooth.dimension != self.metric.dimension:
            raise ContractViolation("oracle and metric dimensions differ")
        if self.x0 is not None:
            self.x0 = np.array(self.x0, dtype=float)
        k = self.known
        if k.minimizer is not None and k.F_star is not None:
            Fx = self.F(k.minimizer)
            self.smooth.reset_counters()
            if not abs(Fx - k.F_star) <= 1e-8 * max(1.0, abs(k.F_star)):
                raise ContractViolation(
                    f"known F* = {k.F_star!r} disagrees with F(x*) = {Fx!r}")

    @property
    def dimension(self) -> int:
        return self.metric.dimension

    def F(self, x) -> float:
        hx = self.h.value(x)
        if math.isinf(hx):
            return math.inf
        return self.smooth.value(x) + hx

    def in_domain(self, x) -> bool:
        return self.h.contains(x)

    def min_norm_subgradient(self, x) -> np.ndarray:
        """Subgradient of F at x with the smallest dual norm (one gradient call)."""
        return self.h.min_norm_subgradient(self.smooth.gradient(x), x, self.metric)

    def default_x0(self) -> np.ndarray:
        """The stored starting point, else the all-ones direction scaled to norm 10."""
        if self.x0 is not None:
            return self.x0.copy()
        e = np.ones(self.dimension)
        return 10.0 * e / self.metric.primal_norm(e)


def eval_F(problem: Problem, x) -> float:
    return problem.F(x)


def residual_bound(subgradient_norm: float, sigma: float, p: float) -> float:
    """Upper bound on F(x) - F* from ||F'(x)||_* under uniform convexity (sigma, p)."""
    if p < 2:
        raise ContractViolation(f"uniform convexity degree must be >= 2, got {p}")
    if sigma <= 0:
        return math.inf if subgradient_norm > 0 else 0.0
    q = p / (p - 1.0)
    return (p - 1.0) / p * (1.0 / sigma) ** (1.0 / (p - 1.0)) * subgradient_norm ** q


def subgradient_residual(problem: Problem, subgradient, sigma: float, p: float) -> float:
    return residual_bound(problem.metric.dual_norm(subgradient), sigma, p)


# -- factories --------------------------------------------------------------

def make_powered_norm(p: float, center, metric: MetricOperator, x0=None) -> Problem:
    """Problem for f(x) = ||x - center||^p / p with its certified constants."""
    oracle = PoweredNormOracle(p, center, metric)
    known = KnownConstants(minimizer=oracle.center.copy(), F_star=0.0)
    if p >= 2:
        known.sigma[_key(p)] = 2.0 ** (2.0 - p)
    if p == 2:
        known.quadratic = True
        known.lipschitz_gradient = 1.0
        known.strong_convexity = 1.0
    elif 2 < p <= 3:
        known.holder[_key(p - 2.0)] = (p - 1.0) * 2.0 ** (3.0 - p)
    return Problem(oracle, ZeroPart(), metric, known, x0=x0, name=f"powered_norm(p={p:g})")


def make_logsumexp(a, x0=None) -> Problem:
    """log-sum-exp with metric B = sum_i a_i a_i^T and its Hoelder bounds."""
    oracle = LogSumExpOracle(a)
    B = oracle.a.T @ oracle.a
    try:
        metric = MetricOperator(B)
    except ContractViolation as exc:
        raise ContractViolation(
            "sum of a_i a_i^T is singular; reduce the dimension of the problem") from exc
    if np.linalg.cond(B) > 1e12:
        raise ContractViolation(
            "sum of a_i a_i^T is numerically singular; reduce the dimension of the problem")
    known = KnownConstants(holder={0.0: 1.0, 1.0: 2.0})
    return Problem(oracle, ZeroPart(), metric, known, x0=x0, name=f"logsumexp(m={oracle.a.shape[0]})")


def make_quadratic(A, b, metric: MetricOperator, x0=None) -> Problem:
    oracle = QuadraticOracle(A, b)
    ev = scipy.linalg.eigh(oracle.A, metric.B, eigvals_only=True)
    L, mu = float(ev.max()), float(max(ev.min(), 0.0))
    if ev.min() < -1e-9 * max(1.0, abs(L)):
        raise ContractViolation("quadratic operator is not positive semidefinite")
    known = KnownConstants(quadratic=True, lipschitz_gradient=L, strong_convexity=mu)
    if mu > 1e-12 * max(L, 1e-300):
        known.sigma[2.0] = mu
        xs = np.linalg.solve(oracle.A, oracle.b)
        known.minimizer = xs
        known.F_star = float(-0.5 * oracle.b @ xs)
    return Problem(oracle, ZeroPart(), metric, known, x0=x0, name="quadratic")


def make_sum(problems, weights, x0=None) -> Problem:
    """Weighted sum of problems sharing one metric.

    Constants combine as certified bounds: sigma adds (missing entries count as
    0, valid for convex terms), Hoelder constants add with quadratic terms
    contributing 0, and a minimizer is kept only when all active terms share it.
    """
    problems = list(problems)
    weights = [float(w) for w in weights]
    metric = problems[0].metric
    if any(not p.metric.same_as(metric) for p in problems):
        raise ContractViolation("all summands must share the same metric")
    composites = [p.h for p in problems if not isinstance(p.h, ZeroPart)]
    if len(composites) > 1:
        raise ContractViolation("at most one summand may carry a nonzero composite part")
    h = composites[0] if composites else ZeroPart()
    oracle = SumOracle([p.smooth for p in problems], weights)
    active = [(w, p.known) for w, p in zip(weights, problems) if w > 0]

    known = KnownConstants(quadratic=all(k.quadratic for _, k in active))
    for p in sorted({d for _, k in active for d in k.sigma}):
        total = sum(w * (k.sigma_at(p) or 0.0) for w, k in active)
        if total > 0:
            known.sigma[p] = total
    if not known.quadratic:
        for nu in sorted({d for _, k in active for d in k.holder}):
            parts = [k.holder_at(nu) for _, k in active]
            if all(v is not None for v in parts):
                known.holder[nu] = sum(w * v for (w, _), v in zip(active, parts))
    if all(k.lipschitz_gradient is not None for _, k in active):
        known.lipschitz_gradient = sum(w * k.lipschitz_gradient for w, k in active)
    mus = [w * (k.strong_convexity or 0.0) for w, k in active]
    if any(k.strong_convexity is not None for _, k in active):
        known.strong_convexity = sum(mus)
    mins = [k.minimizer for _, k in active]
    if all(m is not None for m in mins) and all(np.array_equal(m, mins[0]) for m in mins):
        if h.contains(mins[0]) and all(k.F_star is not None for _, k in active):
            known.minimizer = mins[0].copy()
            known.F_star = sum(w * k.F_star for w, k in active)
    name = " + ".join(f"{w:g}*{p.name}" for w, p in zip(weights, problems))
    return Problem(oracle, h, metric, known, x0=x0, name=name)


def with_ball(problem: Problem, center, radius: float) -> Problem:
    """Same smooth part restricted to a B-norm ball; unconstrained optimum info is dropped
    unless the minimizer lies inside the ball."""
    ball = BallIndicator(center, radius, problem.metric)
    k = problem.known
    known = KnownConstants(dict(k.sigma), dict(k.holder), quadratic=k.quadratic,
                           lipschitz_gradient=k.lipschitz_gradient,
                           strong_convexity=k.strong_convexity)
    if k.minimizer is not None and ball.contains(k.minimizer):
        known.minimizer, known.F_star = k.minimizer.copy(), k.F_star
    return Problem(problem.smooth, ball, problem.metric, known, x0=problem.x0,
                   name=f"{problem.name} on ball")
