"""Euclidean geometry induced by a fixed SPD operator B.

Primal vectors x live in E and are measured by ``||x|| = <Bx, x>^{1/2}``;
dual vectors (gradients) live in E* and are measured by
``||s||_* = <s, B^{-1} s>^{1/2}``.  Both are plain 1-D numpy arrays here;
the role is carried by the name of the argument, and conversion between the
two spaces always goes through :meth:`MetricOperator.to_dual` or
:meth:`MetricOperator.to_primal`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-10
POWER_ITERATION_THRESHOLD = 64


class ContractViolation(ValueError):
    """An operation was called with arguments outside its contract."""


class NeedsPositiveShift(ArithmeticError):
    """``A + lam*B`` is singular at ``lam = 0``; retry with a positive shift."""


def asymmetry(A: np.ndarray) -> float:
    """Relative Frobenius size of the antisymmetric part of ``A``."""
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(A - A.T) / scale)


def symmetrize(A, what: str = "matrix") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{what} must be square, got shape {A.shape}")
    drift = asymmetry(A)
    if drift > SYMMETRY_RTOL:
        log.warning("%s symmetrized; relative asymmetry %.3e", what, drift)
    return 0.5 * (A + A.T)


@dataclass(frozen=True, eq=False)
class MetricOperator:
    """Symmetric positive-definite operator ``B`` with its cached Cholesky factor.

    Instances are immutable: the matrix and factor are stored read-only.
    """

    B: np.ndarray
    chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] == 0:
            raise ContractViolation(f"metric must be a non-empty square matrix, got shape {B.shape}")
        if asymmetry(B) > 1e-12:
            raise ContractViolation("metric operator is not symmetric")
        B = 0.5 * (B + B.T)
        try:
            L = scipy.linalg.cholesky(B, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ContractViolation("metric operator is not positive definite") from exc
        if not np.all(np.diag(L) > 0):
            raise ContractViolation("metric operator is not positive definite")
        B.setflags(write=False)
        L.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "chol", L)

    @classmethod
    def identity(cls, n: int) -> MetricOperator:
        return cls(np.eye(n))

    @property
    def dimension(self) -> int:
        return self.B.shape[0]

    def same_as(self, other: MetricOperator) -> bool:
        return self.dimension == other.dimension and np.array_equal(self.B, other.B)

    def _check(self, v, what="vector") -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dimension,):
            raise ContractViolation(
                f"{what} has shape {v.shape}, expected ({self.dimension},)")
        return v

    # -- conversions between E and E* -------------------------------------

    def to_dual(self, x) -> np.ndarray:
        """Bx for a primal vector x."""
        return self.B @ self._check(x)

    def to_primal(self, s) -> np.ndarray:
        """B^{-1}s for a dual vector s."""
        return scipy.linalg.cho_solve((self.chol, True), self._check(s))

    def whiten_dual(self, s) -> np.ndarray:
        """L^{-1}s; its Euclidean length is the dual norm of s."""
        return scipy.linalg.solve_triangular(self.chol, self._check(s), lower=True)

    def whiten_primal(self, x) -> np.ndarray:
        """L^T x; its Euclidean length is the primal norm of x."""
        return self.chol.T @ self._check(x)

    def unwhiten_primal(self, z) -> np.ndarray:
        """Inverse of :meth:`whiten_primal`: solves L^T x = z."""
        return scipy.linalg.solve_triangular(self.chol.T, z, lower=False)

    def transform(self, A) -> np.ndarray:
        """L^{-1} A L^{-T}, the operator A seen in B-orthonormal coordinates."""
        L = self.chol
        M = scipy.linalg.solve_triangular(L, A, lower=True)
        M = scipy.linalg.solve_triangular(L, M.T, lower=True)
        return 0.5 * (M + M.T)

    # -- norms --------------------------------------------------------------

    def primal_norm(self, x) -> float:
        x = self._check(x)
        return float(np.linalg.norm(self.chol.T @ x))

    def dual_norm(self, s) -> float:
        return float(np.linalg.norm(self.whiten_dual(s)))

    def operator_norm(self, A) -> float:
        """max over ||x|| <= 1 of ||Ax||_* for a symmetric operator A."""
        A = np.asarray(A, dtype=float)
        n = self.dimension
        if A.shape != (n, n):
            raise ContractViolation(f"operator has shape {A.shape}, expected ({n}, {n})")
        if asymmetry(A) > SYMMETRY_RTOL:
            raise ContractViolation("operator_norm requires a symmetric operator")
        C = self.transform(A)
        if not np.any(C):
            return 0.0
        if n <= POWER_ITERATION_THRESHOLD:
            return float(np.max(np.abs(scipy.linalg.eigvalsh(C))))
        return _spectral_radius_power(C)

    def solve_shifted(self, A, lam: float, rhs) -> np.ndarray:
        """Solve ``(A + lam*B) s = rhs`` for a PSD operator A.

        Raises :class:`NeedsPositiveShift` when ``lam == 0`` and A is singular.
        """
        if lam < 0:
            raise ContractViolation(f"shift must be nonnegative, got {lam}")
        rhs = self._check(rhs, "right-hand side")
        A = symmetrize(A, "shifted operator")
        if not np.any(rhs):
            return np.zeros_like(rhs)
        M = A + lam * self.B
        try:
            factor = scipy.linalg.cho_factor(M, lower=True)
        except np.linalg.LinAlgError as exc:
            if lam == 0:
                raise NeedsPositiveShift("A is singular; a positive shift is needed") from exc
            raise ContractViolation("A + lam*B is not positive definite; is A PSD?") from exc
        d = np.abs(np.diag(factor[0]))
        if lam == 0 and d.min() <= 1e-8 * max(d.max(), 1.0):
            raise NeedsPositiveShift("A is numerically singular; a positive shift is needed")
        s = scipy.linalg.cho_solve(factor, rhs)
        # one step of iterative refinement keeps the residual at roundoff level
        s += scipy.linalg.cho_solve(factor, rhs - M @ s)
        return s


def _spectral_radius_power(C: np.ndarray, rtol: float = 1e-10, max_iter: int = 20000) -> float:
    # power iteration on C^2, whose dominant eigenvalue is rho(C)^2
    n = C.shape[0]
    v = np.ones(n) + np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = C @ (C @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nw
        if abs(new - est) <= rtol * new:
            return float(np.sqrt(new))
        est = new
    log.warning("power iteration did not reach rtol=%g; falling back to eigvalsh", rtol)
    return float(np.max(np.abs(scipy.linalg.eigvalsh(C))))
