"""The collocation system: residual, direct solve, Picard iteration, update."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, SolverError
from .problems import SecondOrderIVP
from .quadrature import QuadratureRule

DIVERGENCE_GUARD = 1e8


@dataclass
class NodeState:
    """Positions and velocities stacked over nodes 0..M, node 0 = start."""

    X: np.ndarray  # (M+1, d)
    V: np.ndarray  # (M+1, d)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def M(self) -> int:
        return self.X.shape[0] - 1

    def copy(self) -> "NodeState":
        return NodeState(self.X.copy(), self.V.copy())


@dataclass
class StepResult:
    x_end: np.ndarray
    v_end: np.ndarray
    f_evals: int
    iterations_used: int
    final_residual: float


def _as_u0(u0, d):
    x0, v0 = u0
    return np.broadcast_to(np.atleast_1d(x0), (d,)).astype(float), \
        np.broadcast_to(np.atleast_1d(v0), (d,)).astype(float)


def free_flight(u0, dt: float, rule: QuadratureRule, d: int) -> NodeState:
    """Node values for f = 0: X_m = x0 + dt tau_m v0, V_m = v0."""
    x0, v0 = _as_u0(u0, d)
    tau = np.concatenate(([0.0], rule.nodes))
    X = x0[None, :] + dt * tau[:, None] * v0[None, :]
    V = np.broadcast_to(v0, (rule.M + 1, d)).copy()
    return NodeState(X, V)


def collocation_residual(problem: SecondOrderIVP, state: NodeState, u0,
                         dt: float, rule: QuadratureRule, forces=None) -> float:
    """Infinity-norm residual of the collocation system at ``state``."""
    x0, v0 = _as_u0(u0, problem.d)
    F = problem.f_nodes(state.X, state.V) if forces is None else forces
    tau = np.concatenate(([0.0], rule.nodes))
    r_x = state.X - x0[None, :] - dt * tau[:, None] * v0[None, :] \
        - dt * dt * (rule.QQ @ F)
    r_v = state.V - v0[None, :] - dt * (rule.Q @ F)
    return max(np.max(np.abs(r_x)), np.max(np.abs(r_v)))


def solve_collocation_linear(problem: SecondOrderIVP, u0, dt: float,
                             rule: QuadratureRule) -> NodeState:
    """Direct dense solve of the collocation system for a linear force."""
    if not problem.is_linear:
        raise SolverError("direct collocation solve needs a linear problem")
    A_x, A_v = problem.linear_parts
    d, Mp1 = problem.d, rule.M + 1
    n = Mp1 * d
    # F(U) = Fx X + Fv V with node-wise blocks
    Fx = np.kron(np.eye(Mp1), A_x)
    Fv = np.kron(np.eye(Mp1), A_v)
    QQb = np.kron(rule.QQ, np.eye(d))
    Qb = np.kron(rule.Q, np.eye(d))
    A = np.block([
        [np.eye(n) - dt * dt * QQb @ Fx, -dt * dt * QQb @ Fv],
        [-dt * Qb @ Fx, np.eye(n) - dt * Qb @ Fv],
    ])
    ff = free_flight(u0, dt, rule, d)
    rhs = np.concatenate([ff.X.ravel(), ff.V.ravel()])
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"collocation system singular at dt={dt}") from exc
    return NodeState(sol[:n].reshape(Mp1, d), sol[n:].reshape(Mp1, d))


def picard_iterate(problem: SecondOrderIVP, u0, dt: float, rule: QuadratureRule,
                   K: int | None = None, tol: float | None = None,
                   initial: NodeState | None = None, forces=None):
    """Unpreconditioned Richardson iteration on the collocation system.

    Iterates U^{k+1} = C_coll U_0 + dt Q_coll F(U^k) for K steps or until
    the successive-difference trace drops below ``tol``.  Returns the final
    state, the trace of infinity-norm updates, and the final force values.
    """
    if K is None and tol is None:
        raise ValueError("need an iteration count or a tolerance")
    x0, v0 = _as_u0(u0, problem.d)
    ff = free_flight(u0, dt, rule, problem.d)
    state = ff.copy() if initial is None else initial.copy()
    if forces is None:
        F = problem.f_nodes(state.X, state.V)
    else:
        F = np.array(forces, float)
    trace = []
    k = 0
    while True:
        if K is not None and k >= K:
            break
        X_new = ff.X + dt * dt * (rule.QQ @ F)
        V_new = ff.V + dt * (rule.Q @ F)
        delta = max(np.max(np.abs(X_new - state.X)), np.max(np.abs(V_new - state.V)))
        trace.append(delta)
        state = NodeState(X_new, V_new)
        if np.max(np.abs(X_new)) > DIVERGENCE_GUARD or np.max(np.abs(V_new)) > DIVERGENCE_GUARD:
            raise DivergenceError(f"Picard iterate exceeded {DIVERGENCE_GUARD:g} at k={k}")
        F = np.vstack([F[:1], problem.f_nodes(state.X[1:], state.V[1:])])
        k += 1
        if tol is not None and delta <= tol:
            break
    return state, trace, F


def update_step(state: NodeState, u0, dt: float, rule: QuadratureRule,
                problem: SecondOrderIVP | None = None, forces=None):
    """End-of-step update from the node values via the q and qQ rows."""
    x0, v0 = _as_u0(u0, state.d)
    if forces is None:
        F = problem.f_nodes(state.X, state.V)
    else:
        F = forces
    x_end = x0 + dt * v0 + dt * dt * (rule.qQ @ F)
    v_end = v0 + dt * (rule.q @ F)
    return x_end, v_end
