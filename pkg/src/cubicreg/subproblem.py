"""Exact minimization of the regularized second-order model.

For a point x, a regularization level H > 0 and a degree nu in [0, 1] the model is

    M(y) = Q(x; y) + H ||y - x||^{2+nu} / ((1+nu)(2+nu)) + h(y),

with Q the second-order Taylor model of f at x.  Its stationarity condition
for h = 0 reads ``g + A s + lam(r) B s = 0`` with ``s = y - x``, ``r = ||s||`` and
``lam(r) = H r^nu / (1+nu)``.  Eliminating s leaves a scalar (secular) equation
in r, solved here in B-orthonormal eigen-coordinates of the Hessian.  Convexity
of f means there is no hard case: ``A + lam B`` is positive definite for lam > 0.

For the ball composite the constraint is dualized with a multiplier mu >= 0; for
fixed mu the inner problem is again a secular problem (Hessian shifted by mu B),
and the boundary distance of its solution is monotone in mu.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .normed_space import ContractViolation, MetricOperator, symmetrize
from .oracles import BallIndicator, Problem, ZeroPart


class SubproblemError(RuntimeError):
    """Root bracketing or refinement failed; ``bracket`` holds the last interval."""

    def __init__(self, message, bracket=None, history=None):
        super().__init__(message)
        self.bracket = bracket
        self.history = history or []


class ModelCertificateError(AssertionError):
    pass


@dataclass(frozen=True)
class SubproblemSettings:
    scalar_tol: float = 1e-11
    max_scalar_iters: int = 200
    inner_tol: float = 1e-9
    inner_max_iters: int = 5000

    def __post_init__(self):
        if min(self.scalar_tol, self.max_scalar_iters, self.inner_tol, self.inner_max_iters) <= 0:
            raise ContractViolation("subproblem settings must all be positive")


@dataclass
class ModelSolution:
    """Minimizer T of the model at x together with the quantities derived from it.

    ``h_subgradient`` is the implicit element ``-(g + A s + lam B s)`` of the
    subdifferential of h at T; ``model_decrease`` is F(x) - model_min computed
    without cancellation.
    """

    x: np.ndarray
    T: np.ndarray
    s: np.ndarray
    r: float
    lam: float
    H: float
    nu: float
    F_x: float
    model_min: float
    model_decrease: float
    grad_x: np.ndarray
    hess_s: np.ndarray
    h_subgradient: np.ndarray
    stationarity_residual: float
    multiplier: float = 0.0
    history: list = field(default_factory=list, repr=False)

    def history_json(self) -> str:
        """Secular-iteration log, for debugging."""
        return json.dumps(self.history)


def reg_coefficient(nu: float) -> float:
    return 1.0 / ((1.0 + nu) * (2.0 + nu))


def lam_of_r(H: float, nu: float, r: float) -> float:
    """Derivative of H r^{2+nu}/((1+nu)(2+nu)) divided by r."""
    if r == 0.0:
        return H if nu == 0 else 0.0
    return H * r ** nu / (1.0 + nu)


def model_value(problem: Problem, x, y, H: float, nu: float = 1.0) -> float:
    """M_{nu,H}(x; y); +inf when y lies outside dom F.  Evaluates the oracle at x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    hy = problem.h.value(y)
    if math.isinf(hy):
        return math.inf
    f = problem.smooth
    s = y - x
    Q = f.value(x) + f.gradient(x) @ s + 0.5 * s @ f.hessian(x) @ s
    r = problem.metric.primal_norm(s)
    return float(Q + H * r ** (2.0 + nu) * reg_coefficient(nu) + hy)


class _Secular:
    """Model minimizer for h = 0 in B-orthonormal eigen-coordinates of A.

    With ``L^{-1} A L^{-T} = Q diag(w) Q^T`` and ``c = Q^T L^{-1} g``, the step for
    a shift lam is ``z = -c / (w + lam)`` and ``||s|| = ||z||``.
    """

    def __init__(self, w, c, H, nu, settings: SubproblemSettings, history):
        self.w, self.c, self.H, self.nu = w, c, H, nu
        self.settings = settings
        self.history = history

    def step(self, lam):
        return -self.c / (self.w + lam)

    def psi(self, r):
        lam = lam_of_r(self.H, self.nu, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = self.step(lam)
        norm = float(np.linalg.norm(z)) if np.all(np.isfinite(z)) else math.inf
        val = norm - r
        self.history.append({"r": r, "lam": lam, "psi": val})
        return val

    def solve(self):
        """Return (z, r, lam) solving ||z(lam(r))|| = r."""
        gnorm = float(np.linalg.norm(self.c))
        if gnorm == 0.0:
            return np.zeros_like(self.c), 0.0, lam_of_r(self.H, self.nu, 0.0)
        H, nu = self.H, self.nu
        if nu == 0.0:
            z = self.step(H)
            return z, float(np.linalg.norm(z)), H
        # ||z(lam)|| <= ||c|| / lam, so psi(r_hi) <= 0 at lam(r_hi) * r_hi = ||c||
        r_hi = ((1.0 + nu) * gnorm / H) ** (1.0 / (1.0 + nu))
        f_hi = self.psi(r_hi)
        if f_hi >= 0.0:
            # equality: every active eigenvalue is zero
            lam = lam_of_r(H, nu, r_hi)
            return self.step(lam), r_hi, lam
        r_lo, f_lo = r_hi, f_hi
        for _ in range(self.settings.max_scalar_iters):
            r_lo *= 0.5
            f_lo = self.psi(r_lo)
            if f_lo > 0.0:
                break
            r_hi, f_hi = r_lo, f_lo
        else:
            raise SubproblemError("could not bracket the secular root from below",
                                  bracket=(r_lo, r_hi), history=self.history)
        try:
            r = brentq(self.psi, r_lo, r_hi, xtol=self.settings.scalar_tol * 1e-4 * r_hi,
                       rtol=4 * np.finfo(float).eps, maxiter=self.settings.max_scalar_iters)
        except (RuntimeError, ValueError) as exc:
            raise SubproblemError(f"secular root finding failed: {exc}",
                                  bracket=(r_lo, r_hi), history=self.history) from exc
        lam = lam_of_r(H, nu, r)
        z = self.step(lam)
        return z, float(np.linalg.norm(z)), lam


def _eigen_frame(metric: MetricOperator, A):
    Ahat = metric.transform(A)
    w, Qm = scipy.linalg.eigh(Ahat)
    scale = max(1.0, float(np.abs(w).max()))
    if w.min() < -1e-9 * scale:
        raise ContractViolation(f"Hessian is not PSD (min eigenvalue {w.min():.3e})")
    return np.maximum(w, 0.0), Qm


def solve_model(problem: Problem, x, H: float, nu: float = 1.0,
                settings: SubproblemSettings | None = None) -> ModelSolution:
    """Minimize M_{nu,H}(x; .) over dom F.

    Performs exactly one gradient and one Hessian evaluation at x (plus one
    value evaluation for F(x)).
    """
    settings = settings or SubproblemSettings()
    if not H > 0:
        raise ContractViolation(f"regularization level must be positive, got {H}")
    if not 0.0 <= nu <= 1.0:
        raise ContractViolation(f"Hoelder degree must lie in [0, 1], got {nu}")
    x = np.array(x, dtype=float)
    if not problem.in_domain(x):
        raise ContractViolation("solve_model called at a point outside dom F")
    metric, f = problem.metric, problem.smooth
    F_x = problem.F(x)
    g = f.gradient(x)
    A = symmetrize(f.hessian(x), "Hessian")
    w, Qm = _eigen_frame(metric, A)
    ghat = metric.whiten_dual(g)
    history: list = []

    def unconstrained(shift, ghat_shifted):
        c = Qm.T @ ghat_shifted
        z, r, lam = _Secular(w + shift, c, H, nu, settings, history).solve()
        return metric.unwhiten_primal(Qm @ z), r, lam

    multiplier = 0.0
    if isinstance(problem.h, ZeroPart):
        s, r, lam = unconstrained(0.0, ghat)
    elif isinstance(problem.h, BallIndicator):
        s, r, lam, multiplier = _solve_ball(problem.h, metric, x, ghat, unconstrained,
                                            settings, history)
    else:
        raise ContractViolation(f"unsupported composite part {type(problem.h).__name__}")

    T = x + s
    if isinstance(problem.h, BallIndicator):
        T = problem.h.project(T)
        s = T - x
    r = metric.primal_norm(s)
    lam_applied = lam
    lam_r = lam_of_r(H, nu, r)
    As = A @ s
    Bs = metric.to_dual(s)
    h_sub = -(g + As + lam_r * Bs)
    decrease = -(float(g @ s) + 0.5 * float(s @ As) + H * r ** (2.0 + nu) * reg_coefficient(nu))
    decrease -= problem.h.value(T) - problem.h.value(x)
    if isinstance(problem.h, BallIndicator):
        residual = _normal_cone_distance(problem.h, metric, T, h_sub)
    else:
        residual = metric.dual_norm(h_sub)
    return ModelSolution(
        x=x, T=T, s=s, r=r, lam=lam_applied, H=H, nu=nu, F_x=F_x,
        model_min=F_x - decrease, model_decrease=decrease, grad_x=g, hess_s=As,
        h_subgradient=h_sub, stationarity_residual=residual,
        multiplier=multiplier, history=history)


def _normal_cone_distance(ball: BallIndicator, metric, T, v) -> float:
    """Dual-norm distance from v to the normal cone of the ball at T."""
    vw = metric.whiten_dual(v)
    if not ball.on_boundary(T):
        return float(np.linalg.norm(vw))
    nw = metric.whiten_primal(T - ball.center)
    t = max(0.0, float(vw @ nw) / float(nw @ nw))
    return float(np.linalg.norm(vw - t * nw))


def _solve_ball(ball: BallIndicator, metric, x, ghat, unconstrained, settings, history):
    R = ball.radius
    # B(x - c) in whitened dual coordinates equals L^T (x - c)
    dhat = metric.whiten_primal(x - ball.center)

    def solve_at(mu):
        return unconstrained(mu, ghat + mu * dhat)

    def excess(mu):
        s, _, _ = solve_at(mu)
        val = metric.primal_norm(x + s - ball.center) - R
        history.append({"mu": mu, "excess": val})
        return val

    s, r, lam = solve_at(0.0)
    if metric.primal_norm(x + s - ball.center) <= R:
        return s, r, lam, 0.0
    mu_hi = 1.0
    for _ in range(settings.max_scalar_iters):
        if excess(mu_hi) < 0.0:
            break
        mu_hi *= 4.0
    else:
        raise SubproblemError("could not bracket the ball multiplier", bracket=(0.0, mu_hi),
                              history=history)
    try:
        mu = brentq(excess, 0.0, mu_hi, xtol=settings.inner_tol * 1e-6 * max(1.0, mu_hi),
                    rtol=4 * np.finfo(float).eps, maxiter=settings.inner_max_iters)
    except (RuntimeError, ValueError) as exc:
        raise SubproblemError(f"ball multiplier search failed: {exc}", bracket=(0.0, mu_hi),
                              history=history) from exc
    s, r, lam = solve_at(mu)
    return s, r, lam, float(mu)


def new_point_subgradient(problem: Problem, solution: ModelSolution):
    """F'(T) = grad f(T) + h'(T) and its dual norm (one gradient evaluation at T)."""
    if solution.r == 0.0:
        v = problem.min_norm_subgradient(solution.T)
        return v, problem.metric.dual_norm(v)
    v = problem.smooth.gradient(solution.T) + solution.h_subgradient
    return v, problem.metric.dual_norm(v)


def model_decrease_certificate(problem: Problem, solution: ModelSolution) -> float:
    """Upper bound F(x) - <A s, s>/2 - H r^3/3 on the cubic model minimum.

    Raises :class:`ModelCertificateError` if the computed minimum exceeds it.
    """
    if solution.nu != 1.0:
        raise ContractViolation("the model decrease certificate is stated for the cubic model")
    sol = solution
    cert = sol.F_x - 0.5 * float(sol.s @ sol.hess_s) - sol.H * sol.r ** 3 / 3.0
    if sol.model_min > cert + 1e-9 * (1.0 + abs(sol.F_x)):
        raise ModelCertificateError(
            f"model minimum {sol.model_min!r} exceeds certificate {cert!r}")
    return cert
