"""Best-response dynamics over linear output-feedback strategies.

Each best response is an LQG problem on an augmented plant whose state stacks
the true state ``x`` with the opponent's current filter state.  With the
minimizer moving first, the minimizer's plant at iteration ``k`` has
dimension ``(2k-1) n`` and the maximizer's ``2k n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from . import numerics
from .config import Tolerances
from .errors import NotStable, ValueUnbounded
from .game_model import GameSpec

log = logging.getLogger(__name__)

MINIMIZER_FIRST = "minimizer_first"
MAXIMIZER_FIRST = "maximizer_first"


@dataclass
class AugmentedPlant:
    """One player's view of the game with the opponent's strategy frozen.

    ``X[t+1] = A_bar X + B_bar u + F w_tilde``, ``y = C_bar X + v`` where
    ``w_tilde`` has covariance ``W_bar`` and the stage cost is
    ``X' Q_bar X + u' R u``.
    """

    player: int
    order_k: int
    A_bar: np.ndarray
    B_bar: np.ndarray
    C_bar: np.ndarray
    F: np.ndarray
    W_bar: np.ndarray
    Q_bar: np.ndarray
    R: np.ndarray
    state_dim: int


@dataclass
class StageSolution:
    plant: AugmentedPlant
    K: np.ndarray
    L: np.ndarray
    P: np.ndarray
    Sigma: np.ndarray
    closed_loop_A: np.ndarray
    closed_loop_F: np.ndarray
    W_tilde: np.ndarray
    Q_tilde: np.ndarray
    cost: float
    cost_dual: float
    control: numerics.RiccatiSolution
    filter: numerics.RiccatiSolution

    @property
    def player(self):
        return self.plant.player

    @property
    def k(self):
        return self.plant.order_k

    @property
    def filter_A(self):
        """Transition of the player's own filter: ``z+ = filter_A z + L y``."""
        p = self.plant
        return p.A_bar + p.B_bar @ self.K - self.L @ p.C_bar


@dataclass
class GameTrace:
    stages: list = field(default_factory=list)
    converged: bool = False
    final_relative_change: float = float("inf")
    order: str = MINIMIZER_FIRST

    @property
    def dimension_ledger(self):
        return [(s.player, s.k, s.plant.state_dim) for s in self.stages]

    def costs(self, player):
        return [s.cost for s in self.stages if s.player == player]

    def last(self, player):
        for s in reversed(self.stages):
            if s.player == player:
                return s
        return None


def _players(order):
    if order == MINIMIZER_FIRST:
        return 1, 2
    if order == MAXIMIZER_FIRST:
        return 2, 1
    raise ValueError(f"unknown iteration order {order!r}")


def _own(spec: GameSpec, player):
    """(B, C, V, R) of ``player``."""
    if player == 1:
        return spec.B1, spec.C1, spec.V1, spec.R1
    return spec.B2, spec.C2, spec.V2, spec.R2


def initial_plant(spec: GameSpec, player=1) -> AugmentedPlant:
    """Plant seen by ``player`` when the opponent plays the zero strategy."""
    B, C, _, R = _own(spec, player)
    n = spec.A.shape[0]
    return AugmentedPlant(player=player, order_k=1, A_bar=spec.A.copy(), B_bar=B.copy(),
                          C_bar=C.copy(), F=np.eye(n), W_bar=spec.W.copy(), Q_bar=spec.Q.copy(),
                          R=R.copy(), state_dim=n)


def augment_against(spec: GameSpec, opponent: StageSolution, order_k) -> AugmentedPlant:
    """Plant for the player responding to the frozen strategy in ``opponent``.

    The augmented state is ``[x; z_opp]``; the opponent's filter is driven by
    its own measurement ``C_opp x + v_opp``, which enters through ``F`` as
    extra process noise.
    """
    player = 3 - opponent.player
    n = spec.A.shape[0]
    B, C, _, R = _own(spec, player)
    B_opp, C_opp, V_opp, R_opp = _own(spec, opponent.player)
    K, L = opponent.K, opponent.L
    d = opponent.plant.state_dim

    A_bar = np.block([[spec.A, B_opp @ K],
                      [L @ C_opp, opponent.filter_A]])
    B_bar = np.vstack([B, np.zeros((d, B.shape[1]))])
    C_bar = np.hstack([C, np.zeros((C.shape[0], d))])
    F = la.block_diag(np.eye(n), L)
    W_bar = la.block_diag(spec.W, V_opp)
    Q_bar = la.block_diag(spec.Q, K.T @ R_opp @ K)
    return AugmentedPlant(player=player, order_k=order_k, A_bar=A_bar, B_bar=B_bar, C_bar=C_bar,
                          F=F, W_bar=W_bar, Q_bar=numerics.sym(Q_bar), R=R, state_dim=n + d)


def augment_for_max(spec: GameSpec, prev_min: StageSolution) -> AugmentedPlant:
    if prev_min.player != 1:
        raise ValueError("augment_for_max expects a minimizer stage")
    return augment_against(spec, prev_min, prev_min.k)


def augment_for_min(spec: GameSpec, prev_max: StageSolution) -> AugmentedPlant:
    if prev_max.player != 2:
        raise ValueError("augment_for_min expects a maximizer stage")
    return augment_against(spec, prev_max, prev_max.k + 1)


def lqg_best_response(plant: AugmentedPlant, V_own, tol: Tolerances | None = None) -> StageSolution:
    """Optimal LQG strategy on ``plant`` and its exact average cost."""
    role = numerics.MINIMIZER if plant.player == 1 else numerics.MAXIMIZER
    V_own = np.atleast_2d(V_own)
    ctrl = numerics.solve_dare_control(plant.A_bar, plant.B_bar, plant.Q_bar, plant.R,
                                       role=role, tol=tol)
    W_eff = numerics.sym(plant.F @ plant.W_bar @ plant.F.T)
    filt = numerics.solve_dare_filter(plant.A_bar, plant.C_bar, W_eff, V_own, tol=tol)
    K, L = ctrl.gain, filt.gain
    A, B, C = plant.A_bar, plant.B_bar, plant.C_bar

    A_cl = np.block([[A, B @ K],
                     [L @ C, A + B @ K - L @ C]])
    F_cl = la.block_diag(plant.F, L)
    W_tilde = numerics.sym(F_cl @ la.block_diag(plant.W_bar, V_own) @ F_cl.T)
    Q_tilde = numerics.sym(la.block_diag(plant.Q_bar, K.T @ plant.R @ K))
    stage = StageSolution(plant=plant, K=K, L=L, P=ctrl.P, Sigma=filt.P, closed_loop_A=A_cl,
                          closed_loop_F=F_cl, W_tilde=W_tilde, Q_tilde=Q_tilde,
                          cost=np.nan, cost_dual=np.nan, control=ctrl, filter=filt)
    stage.cost, stage.cost_dual = evaluate_cost(stage, tol=tol)
    return stage


def evaluate_cost(stage: StageSolution, tol: Tolerances | None = None):
    """Average cost by the two Lyapunov routes: ``(Tr(P W), Tr(S Q))``.

    ``P - A'PA = Q_tilde`` and ``S - A S A' = W_tilde`` are solved separately.
    """
    A = stage.closed_loop_A
    rho = numerics.spectral_radius(A)
    if rho >= 1.0:
        raise NotStable(f"closed loop spectral radius {rho:.6g} >= 1")
    P = numerics.solve_dlyap(A, stage.Q_tilde, tol=tol)
    S = numerics.solve_dlyap(A.T, stage.W_tilde, tol=tol)
    return float(np.trace(P @ stage.W_tilde)), float(np.trace(S @ stage.Q_tilde))


def minimizer_initial(spec: GameSpec, tol: Tolerances | None = None) -> StageSolution:
    """Minimizer's LQG controller against a maximizer that plays zero."""
    return lqg_best_response(initial_plant(spec, 1), spec.V1, tol=tol)


def maximizer_initial(spec: GameSpec, first_min: StageSolution | None = None,
                      tol: Tolerances | None = None) -> StageSolution:
    """Maximizer's first response (iteration 1) to the minimizer's LQG controller."""
    if first_min is None:
        first_min = minimizer_initial(spec, tol=tol)
    return lqg_best_response(augment_for_max(spec, first_min), spec.V2, tol=tol)


def next_stage(spec: GameSpec, previous: StageSolution | None, first_player=1,
               tol: Tolerances | None = None) -> StageSolution:
    """The best response that follows ``previous`` in the alternating sequence."""
    if previous is None:
        plant = initial_plant(spec, first_player)
    else:
        # the first mover starts a new iteration index
        k = previous.k + 1 if previous.player != first_player else previous.k
        plant = augment_against(spec, previous, k)
    V_own = spec.V1 if plant.player == 1 else spec.V2
    return lqg_best_response(plant, V_own, tol=tol)


def relative_change(new, old):
    return abs(new - old) / max(1.0, abs(new))


def run_best_response(spec: GameSpec, max_k=10, tol=1e-6, order=MINIMIZER_FIRST,
                      stop_on_convergence=True, solver_tol: Tolerances | None = None) -> GameTrace:
    """Alternate best responses until both players' costs settle.

    Convergence is declared after a full pair of responses at iteration
    ``k >= 2`` once each player's cost moved by at most
    ``tol * max(1, |J|)`` since iteration ``k - 1``.  A
    :class:`ValueUnbounded` failure is re-raised with the partial trace
    attached as ``exc.trace``.
    """
    if max_k < 1:
        raise ValueError("max_k must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    first, second = _players(order)
    trace = GameTrace(order=order)
    previous = None
    for k in range(1, max_k + 1):
        for player in (first, second):
            try:
                stage = next_stage(spec, previous, first_player=first, tol=solver_tol)
            except ValueUnbounded as exc:
                exc.trace = trace
                raise
            trace.stages.append(stage)
            previous = stage
            log.debug("player %d k=%d dim=%d cost=%.12g", player, stage.k,
                      stage.plant.state_dim, stage.cost)
        if k >= 2:
            changes = [relative_change(c[-1], c[-2]) for c in (trace.costs(1), trace.costs(2))]
            trace.final_relative_change = max(changes)
            trace.converged = trace.final_relative_change <= tol
            if trace.converged and stop_on_convergence:
                break
    return trace


def stage_summary(stage: StageSolution, verbose=False):
    out = {
        "player": stage.player,
        "k": stage.k,
        "state_dim": stage.plant.state_dim,
        "cost": stage.cost,
        "cost_dual": stage.cost_dual,
        "control_spectral_radius": stage.control.closed_loop_spectral_radius,
        "filter_spectral_radius": stage.filter.closed_loop_spectral_radius,
        "closed_loop_spectral_radius": numerics.spectral_radius(stage.closed_loop_A),
        "control_residual": stage.control.residual,
        "filter_residual": stage.filter.residual,
        "control_iterations": stage.control.iterations_used,
        "filter_iterations": stage.filter.iterations_used,
    }
    if verbose:
        for name in ("K", "L", "P", "Sigma"):
            out[name] = getattr(stage, name).tolist()
    return out


def trace_to_dict(trace: GameTrace, verbose=False):
    return {
        "order": trace.order,
        "converged": trace.converged,
        "final_relative_change": trace.final_relative_change,
        "dimension_ledger": [list(t) for t in trace.dimension_ledger],
        "stages": [stage_summary(s, verbose) for s in trace.stages],
    }
