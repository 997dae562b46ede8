"""Trajectory simulation of the game under both players' filter strategies.

This is deliberately written from the raw model equations (true state, two
measurement channels, two recursive filters) rather than from the stacked
closed-loop matrices, so that it can serve as an independent check of the
analytic costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .errors import NotStable
from .game_model import GameSpec, make_rng
from .numerics import spectral_radius

_CHUNK = 200_000


@dataclass
class McEstimate:
    mean_cost: float
    std_error: float
    steps: int
    seed: int
    burn_in: int = 0
    batches: int = 0


@numba.njit(cache=True)
def _mv(M, v, out, sign):
    # out += sign * M @ v, without temporaries
    for i in range(M.shape[0]):
        acc = 0.0
        for j in range(M.shape[1]):
            acc += M[i, j] * v[j]
        out[i] += sign * acc


@numba.njit(cache=True)
def _quad(M, v):
    acc = 0.0
    for i in range(M.shape[0]):
        for j in range(M.shape[1]):
            acc += v[i] * M[i, j] * v[j]
    return acc


@numba.njit(cache=True)
def _run_chunk(x, z1, z2, A, B1, B2, C1, C2, Q, R1, R2,
               A1, B1b, C1b, K1, L1, A2, B2b, C2b, K2, L2, w, v1, v2, out):
    u1 = np.zeros(K1.shape[0])
    u2 = np.zeros(K2.shape[0])
    e1 = np.zeros(C1.shape[0])
    e2 = np.zeros(C2.shape[0])
    xn = np.zeros(x.shape[0])
    z1n = np.zeros(z1.shape[0])
    z2n = np.zeros(z2.shape[0])
    for t in range(w.shape[0]):
        u1[:] = 0.0
        u2[:] = 0.0
        _mv(K1, z1, u1, 1.0)
        _mv(K2, z2, u2, 1.0)
        out[t] = _quad(Q, x) + _quad(R1, u1) + _quad(R2, u2)
        # innovations y - C_bar z with y = C x + v
        e1[:] = v1[t]
        _mv(C1, x, e1, 1.0)
        _mv(C1b, z1, e1, -1.0)
        e2[:] = v2[t]
        _mv(C2, x, e2, 1.0)
        _mv(C2b, z2, e2, -1.0)
        xn[:] = w[t]
        _mv(A, x, xn, 1.0)
        _mv(B1, u1, xn, 1.0)
        _mv(B2, u2, xn, 1.0)
        z1n[:] = 0.0
        _mv(A1, z1, z1n, 1.0)
        _mv(B1b, u1, z1n, 1.0)
        _mv(L1, e1, z1n, 1.0)
        z2n[:] = 0.0
        _mv(A2, z2, z2n, 1.0)
        _mv(B2b, u2, z2n, 1.0)
        _mv(L2, e2, z2n, 1.0)
        x[:] = xn
        z1[:] = z1n
        z2[:] = z2n


def _noise_factor(M):
    # symmetric square root, valid for semidefinite covariances
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    return U * np.sqrt(np.clip(w, 0.0, None))


def final_pair(trace):
    """(minimizer stage, maximizer stage, analytic cost) of the last response.

    The last stage is a best response to the stage right before it, so its
    cost is the exact value of the game under that strategy pair.
    """
    if len(trace.stages) < 2:
        raise ValueError("need at least one full pair of best responses")
    a, b = trace.stages[-2], trace.stages[-1]
    mn, mx = (a, b) if a.player == 1 else (b, a)
    return mn, mx, b.cost


def _c(M):
    return np.ascontiguousarray(M, dtype=np.float64)


def simulate_costs(spec: GameSpec, min_stage, max_stage, steps, seed):
    """Per-step stage costs of one trajectory of length ``steps``."""
    for s in (min_stage, max_stage):
        rho = spectral_radius(s.closed_loop_A)
        if rho >= 1.0:
            raise NotStable(f"closed loop spectral radius {rho:.6g} >= 1")
    rng = make_rng(seed)
    n = spec.A.shape[0]
    x = _c(spec.x0_mean + _noise_factor(spec.X0) @ rng.standard_normal(n))
    p1, p2 = min_stage.plant, max_stage.plant
    z1 = np.zeros(p1.state_dim)
    z2 = np.zeros(p2.state_dim)
    Fw, F1, F2 = _noise_factor(spec.W), _noise_factor(spec.V1), _noise_factor(spec.V2)
    args = [_c(M) for M in (spec.A, spec.B1, spec.B2, spec.C1, spec.C2, spec.Q, spec.R1, spec.R2,
                            p1.A_bar, p1.B_bar, p1.C_bar, min_stage.K, min_stage.L,
                            p2.A_bar, p2.B_bar, p2.C_bar, max_stage.K, max_stage.L)]
    costs = np.empty(steps)
    for start in range(0, steps, _CHUNK):
        k = min(_CHUNK, steps - start)
        w = _c(rng.standard_normal((k, n)) @ Fw.T)
        v1 = _c(rng.standard_normal((k, F1.shape[0])) @ F1.T)
        v2 = _c(rng.standard_normal((k, F2.shape[0])) @ F2.T)
        _run_chunk(x, z1, z2, *args, w, v1, v2, costs[start:start + k])
    return costs


def batch_means(samples, batches=100):
    """Mean and batch-means standard error of a correlated series."""
    samples = np.asarray(samples, dtype=float)
    nb = max(2, min(batches, samples.size // 2))
    size = samples.size // nb
    means = samples[: nb * size].reshape(nb, size).mean(axis=1)
    return float(samples.mean()), float(means.std(ddof=1) / np.sqrt(nb)), nb


def monte_carlo_cost(spec: GameSpec, trace, steps=1_000_000, seed=0, burn_in=1000,
                     batches=100) -> McEstimate:
    """Time-averaged stage cost under the trace's final strategy pair."""
    if steps <= burn_in:
        raise ValueError("steps must exceed burn_in")
    mn, mx, _ = final_pair(trace)
    costs = simulate_costs(spec, mn, mx, steps, seed)
    mean, se, nb = batch_means(costs[burn_in:], batches)
    return McEstimate(mean_cost=mean, std_error=se, steps=steps, seed=seed, burn_in=burn_in,
                      batches=nb)
