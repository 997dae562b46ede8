"""Controllability/observability decay of augmented belief dynamics.

Gramians and Hankel singular values of ``(A_bar, B_bar, C_bar)``, decay
estimates built from the eigenvalues of ``A_bar`` alone, and the low-rank
Gramian approximation assembled from those estimates together with its a
priori error bound.

The decay estimates come from the Cauchy matrix

    C[h, j] = -1 / (mu_h + conj(mu_j)),   mu = (lam - 1) / (lam + 1),

i.e. the Gramian kernel of the bilinear (continuous-time) equivalent of the
discrete system.  Its diagonally pivoted factorization ``C = L diag(delta) L*``
selects eigenvalues greedily and the pivots ``delta`` track the Gramian
eigenvalue decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from . import numerics
from .config import Tolerances
from .errors import NotPSD, NotStable, SingularShift

FLUSH_LIMIT = 1e-300


@dataclass
class GramianPair:
    Wc: np.ndarray
    Wo: np.ndarray
    eigenvalues_c: np.ndarray
    eigenvalues_o: np.ndarray
    hankel: np.ndarray


@dataclass
class DecayReport:
    ordered_eigenvalues: np.ndarray
    order: np.ndarray
    deltas: np.ndarray
    delta_ratios: np.ndarray
    cholesky_factor_L: np.ndarray
    gramian_ratios: np.ndarray | None = None
    flushed: bool = False


@dataclass
class ApproximationBound:
    rank_limit: int
    epsilon: float
    W_hat: np.ndarray
    actual_error: float
    bound: float
    satisfied: bool
    numerical_rank: int = 0
    imag_ratio: float = 0.0
    kappa: float = float("nan")


@dataclass
class StageAnalysis:
    gramians: GramianPair
    decay: DecayReport
    bounds: list = field(default_factory=list)
    bound_error: str | None = None


def _require_stable(A):
    rho = numerics.spectral_radius(A)
    if rho >= 1.0:
        raise NotStable(f"spectral radius {rho:.6g} >= 1")


def controllability_gramian(A_bar, B_bar, tol: Tolerances | None = None):
    """Solve ``Wc - A Wc A' = B B'``."""
    A = np.atleast_2d(np.asarray(A_bar, dtype=float))
    B = np.asarray(B_bar, dtype=float).reshape(A.shape[0], -1)
    _require_stable(A)
    return numerics.solve_dlyap(A.T, B @ B.T, tol=tol)


def observability_gramian(A_bar, C_bar, tol: Tolerances | None = None):
    """Solve ``Wo - A' Wo A = C' C``."""
    A = np.atleast_2d(np.asarray(A_bar, dtype=float))
    C = np.asarray(C_bar, dtype=float).reshape(-1, A.shape[0])
    _require_stable(A)
    return numerics.solve_dlyap(A, C.T @ C, tol=tol)


def _psd_sqrt(M, name):
    M = numerics.sym(np.atleast_2d(M))
    w, U = np.linalg.eigh(M)
    scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    if w.min() < -1e-8 * scale:
        raise NotPSD(f"{name} has eigenvalue {w.min():.3g}")
    return U * np.sqrt(np.clip(w, 0.0, None))


def hankel_singular_values(Wc, Wo):
    """``sqrt(eig(Wc Wo))`` in descending order.

    Computed as the singular values of ``Rc' Ro`` with ``Wc = Rc Rc'`` and
    ``Wo = Ro Ro'``, which keeps the result real and nonnegative.
    """
    Rc = _psd_sqrt(Wc, "Wc")
    Ro = _psd_sqrt(Wo, "Wo")
    return np.linalg.svd(Rc.T @ Ro, compute_uv=False)


def gramian_pair(A_bar, B_bar, C_bar, tol: Tolerances | None = None) -> GramianPair:
    Wc = controllability_gramian(A_bar, B_bar, tol=tol)
    Wo = observability_gramian(A_bar, C_bar, tol=tol)
    return GramianPair(
        Wc=Wc, Wo=Wo,
        eigenvalues_c=np.sort(np.linalg.eigvalsh(Wc))[::-1],
        eigenvalues_o=np.sort(np.linalg.eigvalsh(Wo))[::-1],
        hankel=hankel_singular_values(Wc, Wo),
    )


def continuous_eigenvalues(eigenvalues):
    """Bilinear image ``(lam - 1) / (lam + 1)`` of discrete eigenvalues."""
    lam = np.asarray(eigenvalues, dtype=complex)
    if np.any(np.abs(lam + 1.0) < 1e-14):
        raise SingularShift("eigenvalue at -1 has no bilinear image")
    return (lam - 1.0) / (lam + 1.0)


def bilinear_transform(A_bar, B_bar):
    """Continuous-time pair with the same controllability Gramian.

    ``Ac = (A + I)^-1 (A - I)`` and ``Bc = sqrt(2) (A + I)^-1 B`` so that
    ``Ac G + G Ac' + Bc Bc' = 0`` is solved by the discrete Gramian of ``(A, B)``.
    """
    A = np.atleast_2d(np.asarray(A_bar, dtype=float))
    B = np.asarray(B_bar, dtype=float).reshape(A.shape[0], -1)
    shift = A + np.eye(A.shape[0])
    if np.linalg.cond(shift) > 1e12:
        raise SingularShift("A + I is singular to working precision")
    Ac = np.linalg.solve(shift, A - np.eye(A.shape[0]))
    Bc = math.sqrt(2.0) * np.linalg.solve(shift, B)
    return Ac, Bc


def cauchy_matrix(eigenvalues):
    lam = np.asarray(eigenvalues, dtype=complex)
    return -np.outer(lam + 1.0, np.conj(lam) + 1.0) / (2.0 * (np.outer(lam, np.conj(lam)) - 1.0))


def cholesky_decay_estimates(eigenvalues) -> DecayReport:
    """Greedy-pivoted ``L diag(delta) L*`` factorization of the Cauchy matrix.

    The Schur complements of a Cauchy matrix are again Cauchy-like with a
    rank-one generator, so elimination only rescales that generator:
    ``g_h <- g_h (mu_h - mu_j) / (mu_h + conj(mu_j))`` after pivot ``j``.
    Every pivot and multiplier therefore keeps full relative accuracy, down
    to pivots far below machine epsilon times the first one.  The pivot with
    the largest remaining diagonal is taken at each step.
    """
    lam = np.asarray(eigenvalues, dtype=complex).ravel()
    n = lam.size
    if n == 0:
        raise ValueError("no eigenvalues given")
    if np.any(np.abs(lam) >= 1.0):
        raise NotStable("all eigenvalues must lie inside the unit circle")
    mu = continuous_eigenvalues(lam)

    g = np.ones(n, dtype=complex)
    active = np.ones(n, dtype=bool)
    order = np.zeros(n, dtype=int)
    deltas = np.zeros(n)
    L = np.zeros((n, n), dtype=complex)
    flushed = False
    for step in range(n):
        idx = np.flatnonzero(active)
        diag = -np.abs(g[idx]) ** 2 / (2.0 * mu[idx].real)
        pick = int(idx[np.argmax(diag)])
        d = float(diag.max())
        order[step] = pick
        active[pick] = False
        if d < FLUSH_LIMIT or flushed:
            # remaining pivots are numerically zero
            flushed = True
            order[step:] = np.concatenate([[pick], np.flatnonzero(active)])
            for s in range(step, n):
                L[order[s], s] = 1.0
            break
        deltas[step] = d
        # column of the current Schur complement divided by its pivot
        col = -g * np.conj(g[pick]) / (mu + np.conj(mu[pick])) / d
        col[~active] = 0.0
        col[pick] = 1.0
        L[:, step] = col
        g = g * (mu - mu[pick]) / (mu + np.conj(mu[pick]))
    ratios = deltas / deltas[0]
    return DecayReport(ordered_eigenvalues=lam[order], order=order, deltas=deltas,
                       delta_ratios=ratios, cholesky_factor_L=L, flushed=flushed)


def delta_product_formula(eigenvalues):
    """Greedy ordering and pivots straight from the closed-form product.

    ``delta_l = -1/(2 Re mu_l) * prod_{j<l} |(lam_l - lam_j)/(conj(lam_l) lam_j - 1)|^2``;
    kept as an independent check of :func:`cholesky_decay_estimates`.
    """
    lam = list(np.asarray(eigenvalues, dtype=complex).ravel())
    chosen, deltas = [], []
    remaining = list(range(len(lam)))
    while remaining:
        best, best_val = None, -np.inf
        for h in remaining:
            x = lam[h]
            val = -1.0 / (2.0 * ((x - 1) / (x + 1)).real)
            for j in chosen:
                val *= abs((x - lam[j]) * (np.conj(x) + 1) / ((np.conj(x) * lam[j] - 1) * (x + 1))) ** 2
            if val > best_val:
                best, best_val = h, val
        chosen.append(best)
        deltas.append(best_val)
        remaining.remove(best)
    return np.array(chosen), np.array(deltas)


def numerical_rank(M, rel=1e-10):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel * s[0]))


class _LowRankFactors:
    """Pieces shared by the low-rank approximations of one ``(A, B)`` pair."""

    def __init__(self, A_bar, B_bar, tol=None):
        A = np.atleast_2d(np.asarray(A_bar, dtype=float))
        B = np.asarray(B_bar, dtype=float).reshape(A.shape[0], -1)
        _require_stable(A)
        self.n, self.m = A.shape[0], B.shape[1]
        eig = numerics.eig_decomposition(A, tol=tol)
        self.kappa = eig.condition_number_inf
        _, self.B_tilde = bilinear_transform(A, B)
        self.Wc = controllability_gramian(A, B, tol=tol)
        self.decay = cholesky_decay_estimates(eig.eigenvalues)
        X, Xinv = eig.right_eigenvectors, eig.inverse_eigenvectors
        XL = [X @ ((Xinv @ self.B_tilde[:, p])[:, None] * self.decay.cholesky_factor_L)
              for p in range(self.m)]
        # Z[j] is n x m: column p is X_p L e_j
        self.Z = np.stack([np.stack([XL[p][:, j] for p in range(self.m)], axis=1)
                           for j in range(self.n)])
        self.B_tilde_norm1 = float(np.max(np.sum(np.abs(self.B_tilde), axis=0)))

    def approximation(self, l) -> ApproximationBound:
        if not 1 <= l <= self.n:
            raise ValueError(f"rank index l={l} outside 1..{self.n}")
        d = self.decay.deltas
        W_hat = sum(d[j] * self.Z[j] @ self.Z[j].conj().T for j in range(l))
        err = numerics.inf_norm(self.Wc - W_hat.real)
        eps = d[l - 1] / d[0]
        bound = eps * d[0] * (self.m * self.n) * (self.n - l) * (self.kappa * self.B_tilde_norm1) ** 2
        scale = max(numerics.max_abs(self.Wc), np.finfo(float).tiny)
        return ApproximationBound(
            rank_limit=l * self.m, epsilon=float(eps), W_hat=W_hat, actual_error=err,
            bound=float(bound), satisfied=bool(err <= bound),
            numerical_rank=numerical_rank(W_hat), imag_ratio=numerics.max_abs(W_hat.imag) / scale,
            kappa=self.kappa,
        )


def lowrank_gramian_approx(A_bar, B_bar, l, tol: Tolerances | None = None) -> ApproximationBound:
    """Rank ``l*m`` Gramian approximation ``sum_{j<=l} delta_j Z_j Z_j*`` and its bound.

    ``Z_j = [X_1 L e_j, ..., X_m L e_j]`` with ``X_p = X diag(X^-1 b_p)``
    and ``b_p`` the columns of the bilinear input matrix.  The bound is

        eps * delta_1 * (m n) * (n - l) * (kappa_inf(X) * ||B_tilde||_1)^2,

    ``eps = delta_l / delta_1``; the error is the induced infinity norm of
    ``Wc - Re(W_hat)``.
    """
    return _LowRankFactors(A_bar, B_bar, tol=tol).approximation(l)


def analyze_plant(A_bar, B_bar, C_bar, l_grid=None, tol: Tolerances | None = None) -> StageAnalysis:
    gramians = gramian_pair(A_bar, B_bar, C_bar, tol=tol)
    lam = numerics._snap_real(np.linalg.eigvals(A_bar), A_bar)
    decay = cholesky_decay_estimates(lam)
    ev = np.abs(gramians.eigenvalues_c)
    decay.gramian_ratios = ev / ev[0] if ev[0] > 0 else np.zeros_like(ev)
    result = StageAnalysis(gramians=gramians, decay=decay)
    n = np.atleast_2d(A_bar).shape[0]
    grid = list(range(1, n + 1)) if l_grid is None else list(l_grid)
    if grid:
        try:
            factors = _LowRankFactors(A_bar, B_bar, tol=tol)
        except numerics.Defective as exc:
            result.bound_error = str(exc)
        else:
            result.bounds = [factors.approximation(l) for l in grid]
    return result


def analyze_stage(stage, l_grid=None, tol: Tolerances | None = None) -> StageAnalysis:
    """Gramians, Hankel values, decay estimates and bounds for one best response."""
    p = stage.plant
    return analyze_plant(p.A_bar, p.B_bar, p.C_bar, l_grid=l_grid, tol=tol)


def decay_rows(analysis: StageAnalysis):
    """Rows for the tabular export, one per state index (1-based)."""
    g, d = analysis.gramians, analysis.decay
    return [
        {
            "index": i + 1,
            "eigenvalue_c": float(g.eigenvalues_c[i]),
            "eigenvalue_o": float(g.eigenvalues_o[i]),
            "hankel": float(g.hankel[i]),
            "delta": float(d.deltas[i]),
            "delta_ratio": float(d.delta_ratios[i]),
            "gramian_ratio": float(d.gramian_ratios[i]),
        }
        for i in range(len(g.hankel))
    ]
