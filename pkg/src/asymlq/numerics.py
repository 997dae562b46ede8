"""Dense kernels: discrete Lyapunov and Riccati solvers, eigendecompositions.

Riccati equations are solved by value iteration of the Riccati map, which
converges to the stabilizing solution for the ordinary LQG case and for the
game-indefinite case (indefinite state weight, negative definite input weight)
whenever that solution exists.  Failure is reported through the exception
variants in :mod:`asymlq.errors`, never by returning a non-stabilizing answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .config import Tolerances, default_tolerances
from .errors import Defective, NoConvergence, NotStabilizing, NotStable, ValueUnbounded

MINIMIZER = "minimizer"
MAXIMIZER = "maximizer"

# iterates above this magnitude are treated as divergent
_DIVERGENCE_LIMIT = 1e14


@dataclass
class RiccatiSolution:
    """Stabilizing Riccati solution and its associated gain.

    For the control form ``gain`` is the feedback ``K`` (``u = K x``); for the
    filter form it is the estimator gain ``L``.
    """

    P: np.ndarray
    gain: np.ndarray
    closed_loop_spectral_radius: float
    iterations_used: int
    residual: float


@dataclass
class EigenDecomposition:
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray
    inverse_eigenvectors: np.ndarray
    condition_number_inf: float


def _tol(tol):
    return default_tolerances() if tol is None else tol


def sym(M):
    return 0.5 * (M + M.T)


def inf_norm(M):
    """Induced infinity norm (max row sum); 0 for empty matrices."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(M), axis=1)))


def max_abs(M):
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def spectral_radius(A) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _checked_solve(S, rhs, tol: Tolerances, what):
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > tol.condition_limit:
        raise NoConvergence(f"{what} is near singular (condition {cond:.3g})")
    return np.linalg.solve(S, rhs)


def lyapunov_residual(A, P, Q):
    """``P - A' P A - Q`` measured in the induced infinity norm."""
    return inf_norm(P - A.T @ P @ A - Q)


def solve_dlyap(A, Q, tol: Tolerances | None = None):
    """Solve ``P - A' P A = Q`` for stable ``A``.

    The dense solve (scipy) is followed by iterative refinement on the
    residual while it keeps shrinking; the result must satisfy
    ``||residual|| <= tol.residual * max(1, ||Q||)``.
    """
    tol = _tol(tol)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    Q = sym(np.atleast_2d(np.asarray(Q, dtype=float)))
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise NotStable(f"spectral radius {rho:.6g} >= 1")
    if not np.any(Q):
        return np.zeros_like(Q)

    method = "direct" if A.shape[0] <= 10 else "bilinear"
    P = sym(la.solve_discrete_lyapunov(A.T, Q, method=method))
    target = tol.residual * max(1.0, inf_norm(Q))
    # refine past the acceptance target while the residual keeps shrinking
    floor = 8 * np.finfo(float).eps * A.shape[0] * max(1.0, inf_norm(Q))
    res = inf_norm(Q - (P - A.T @ P @ A))
    for _ in range(5):
        if res <= floor:
            break
        E = Q - (P - A.T @ P @ A)
        cand = sym(P + la.solve_discrete_lyapunov(A.T, sym(E), method=method))
        cand_res = inf_norm(Q - (cand - A.T @ cand @ A))
        if cand_res >= 0.5 * res:
            if cand_res < res:
                P = cand
            break
        P, res = cand, cand_res
    res = lyapunov_residual(A, P, Q)
    if res > target:
        raise NoConvergence(f"Lyapunov residual {res:.3g} above {target:.3g}")
    return P


def _iterate(step, P0, tol: Tolerances, diverged):
    P = P0
    for it in range(1, tol.max_iterations + 1):
        P_next = sym(step(P))
        if not np.all(np.isfinite(P_next)) or max_abs(P_next) > _DIVERGENCE_LIMIT:
            diverged(it)
        delta = max_abs(P_next - P)
        P = P_next
        if delta <= tol.riccati_step * max(1.0, max_abs(P)):
            return P, it
    raise NoConvergence(f"Riccati iteration did not converge in {tol.max_iterations} steps")


def _check_max_role(S, tol, it=None):
    top = float(np.max(np.linalg.eigvalsh(sym(S))))
    if top >= -tol.definiteness * max(1.0, max_abs(S)):
        where = "" if it is None else f" at iteration {it}"
        raise ValueUnbounded(
            f"R + B'PB is not negative definite{where} (largest eigenvalue {top:.4g}); "
            "the maximizer's input penalty is too small"
        )


def riccati_control_residual(A, B, Q, R, P):
    S = R + B.T @ P @ B
    return inf_norm(Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(S, B.T @ P @ A) - P)


def solve_dare_control(A, B, Q, R, role=MINIMIZER, tol: Tolerances | None = None) -> RiccatiSolution:
    """Stabilizing solution of the control DARE and feedback ``u = K x``.

    ``P = Q + A'PA - A'PB (R + B'PB)^-1 B'PA``,  ``K = -(R + B'PB)^-1 B'PA``.

    With ``role="maximizer"`` the input weight must be negative definite and
    ``R + B'PB < 0`` is enforced on every iterate; losing it (or divergence)
    raises :class:`ValueUnbounded`.
    """
    tol = _tol(tol)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = sym(np.atleast_2d(np.asarray(Q, dtype=float)))
    R = sym(np.atleast_2d(np.asarray(R, dtype=float)))
    if role not in (MINIMIZER, MAXIMIZER):
        raise ValueError(f"unknown role {role!r}")
    maximizer = role == MAXIMIZER

    def step(P):
        S = R + B.T @ P @ B
        if maximizer:
            _check_max_role(S, tol)
        G = _checked_solve(S, B.T @ P @ A, tol, "R + B'PB")
        return Q + A.T @ P @ A - A.T @ P @ B @ G

    def diverged(it):
        if maximizer:
            raise ValueUnbounded(f"maximizer Riccati iterate diverged at iteration {it}")
        raise NoConvergence(f"Riccati iterate diverged at iteration {it}")

    P, iters = _iterate(step, Q.copy(), tol, diverged)
    S = R + B.T @ P @ B
    if maximizer:
        _check_max_role(S, tol)
    K = -_checked_solve(S, B.T @ P @ A, tol, "R + B'PB")
    rho = spectral_radius(A + B @ K)
    if rho >= 1.0:
        raise NotStabilizing(f"closed loop spectral radius {rho:.6g} >= 1")
    residual = riccati_control_residual(A, B, Q, R, P)
    if residual > tol.residual * max(1.0, inf_norm(Q), inf_norm(P)):
        raise NoConvergence(f"Riccati residual {residual:.3g} too large")
    return RiccatiSolution(P=P, gain=K, closed_loop_spectral_radius=rho,
                           iterations_used=iters, residual=residual)


def riccati_filter_residual(A, C, W, V, S):
    G = V + C @ S @ C.T
    return inf_norm(W + A @ S @ A.T - A @ S @ C.T @ np.linalg.solve(G, C @ S @ A.T) - S)


def solve_dare_filter(A, C, W_eff, V, tol: Tolerances | None = None) -> RiccatiSolution:
    """Steady-state Kalman filter (predictor form).

    ``S = W + A S A' - A S C' (V + C S C')^-1 C S A'`` and
    ``L = A S C' (V + C S C')^-1``; the error dynamics ``A - L C`` are stable.
    """
    tol = _tol(tol)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    W = sym(np.atleast_2d(np.asarray(W_eff, dtype=float)))
    V = sym(np.atleast_2d(np.asarray(V, dtype=float)))

    def step(S):
        G = V + C @ S @ C.T
        H = _checked_solve(G, C @ S @ A.T, tol, "V + C S C'")
        return W + A @ S @ A.T - A @ S @ C.T @ H

    def diverged(it):
        raise NoConvergence(f"filter Riccati iterate diverged at iteration {it}")

    S, iters = _iterate(step, W.copy(), tol, diverged)
    G = V + C @ S @ C.T
    L = _checked_solve(G, C @ S @ A.T, tol, "V + C S C'").T
    rho = spectral_radius(A - L @ C)
    if rho >= 1.0:
        raise NotStabilizing(f"estimator error dynamics spectral radius {rho:.6g} >= 1")
    residual = riccati_filter_residual(A, C, W, V, S)
    if residual > tol.residual * max(1.0, inf_norm(W), inf_norm(S)):
        raise NoConvergence(f"filter Riccati residual {residual:.3g} too large")
    return RiccatiSolution(P=S, gain=L, closed_loop_spectral_radius=rho,
                           iterations_used=iters, residual=residual)


def eig_decomposition(A, tol: Tolerances | None = None) -> EigenDecomposition:
    """Eigenvalues, unit-norm right eigenvectors, their inverse and kappa_inf.

    Raises :class:`Defective` when the eigenvector matrix is too badly
    conditioned (``kappa_inf > tol.diagonalizable_kappa``) to be trusted.
    """
    tol = _tol(tol)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lam, X = np.linalg.eig(A)
    X = X / np.linalg.norm(X, axis=0)
    lam = _snap_real(lam, A)
    try:
        Xinv = np.linalg.inv(X)
    except np.linalg.LinAlgError as exc:
        raise Defective("eigenvector matrix is singular") from exc
    kappa = inf_norm(X) * inf_norm(Xinv)
    if not np.isfinite(kappa) or kappa > tol.diagonalizable_kappa:
        raise Defective(f"eigenvector condition number {kappa:.3g} exceeds gate")
    return EigenDecomposition(eigenvalues=lam, right_eigenvectors=X.astype(complex),
                              inverse_eigenvectors=Xinv.astype(complex),
                              condition_number_inf=float(kappa))


def _snap_real(lam, A):
    # eigenvalues of a real matrix: drop round-off imaginary parts
    lam = np.asarray(lam, dtype=complex).copy()
    scale = max(1.0, max_abs(A))
    tiny = np.abs(lam.imag) <= 10 * np.finfo(float).eps * scale
    lam[tiny] = lam[tiny].real
    return lam
