"""Velocity-Verlet matrices and the node-by-node solve they enable."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .problems import SecondOrderIVP
from .quadrature import QuadratureRule

_FP_TOL = 1e-13
_FP_MAXITER = 100


@dataclass(frozen=True)
class PreconditionerMatrices:
    QE: np.ndarray    # strictly lower triangular, cumulative node spacings
    QI: np.ndarray    # same spacings shifted one column right
    QT: np.ndarray    # (QE + QI) / 2, trapezoidal force weights
    Qx: np.ndarray    # QE @ QT + (QE * QE) / 2, position weights
    dtau: np.ndarray  # (M,) node spacings on the unit interval


def build_preconditioner(rule: QuadratureRule) -> PreconditionerMatrices:
    M = rule.M
    dtau = np.diff(np.concatenate(([0.0], rule.nodes)))
    QE = np.zeros((M + 1, M + 1))
    QI = np.zeros((M + 1, M + 1))
    for m in range(1, M + 1):
        QE[m, :m] = dtau[:m]
        QI[m, 1:m + 1] = dtau[:m]
    QT = 0.5 * (QE + QI)
    Qx = QE @ QT + 0.5 * QE * QE
    return PreconditionerMatrices(QE=QE, QI=QI, QT=QT, Qx=Qx, dtau=dtau)


def _solve_node_velocity(problem: SecondOrderIVP, x, b, dt_qt, node):
    """Solve v = b + dt_qt * f(x, v) for the velocity at one node."""
    if problem.is_linear:
        A_x, A_v = problem.linear_parts
        rhs = b + dt_qt * (A_x @ x)
        v = np.linalg.solve(np.eye(problem.d) - dt_qt * A_v, rhs)
        return v, problem.f(x, v)
    if not problem.velocity_dependent.any():
        f = problem.f(x, b)
        return b + dt_qt * f, f
    v = b.copy()
    for _ in range(_FP_MAXITER):
        f = problem.f(x, v)
        v_new = b + dt_qt * f
        if np.max(np.abs(v_new - v)) <= _FP_TOL:
            return v_new, problem.f(x, v_new)
        v = v_new
    raise SolverError("node velocity solve did not converge", node=node,
                      residual=float(np.max(np.abs(v_new - v))))


def verlet_solve(problem: SecondOrderIVP, rhs_x: np.ndarray, rhs_v: np.ndarray,
                 dt: float, matrices: PreconditionerMatrices, f0=None):
    """Solve M_vv(U) = rhs by one velocity-Verlet pass through the nodes.

    ``rhs_x``/``rhs_v`` are (M+1, d) stacks; row 0 fixes the node-0 values.
    Returns the node states together with the force values at all nodes,
    so callers can reuse them without re-evaluating.
    """
    Mp1 = rhs_x.shape[0]
    X = np.array(rhs_x, dtype=float)
    V = np.array(rhs_v, dtype=float)
    F = np.zeros_like(X)
    F[0] = problem.f(X[0], V[0]) if f0 is None else np.asarray(f0, float)
    QT, Qx = matrices.QT, matrices.Qx
    for m in range(1, Mp1):
        X[m] = rhs_x[m] + dt * dt * (Qx[m, :m] @ F[:m])
        b = rhs_v[m] + dt * (QT[m, :m] @ F[:m])
        V[m], F[m] = _solve_node_velocity(problem, X[m], b, dt * QT[m, m], m)
    return X, V, F
