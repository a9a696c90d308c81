"""The preconditioned iteration: sweeps, starting values, steps, integration."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .collocation import (DIVERGENCE_GUARD, NodeState, StepResult, _as_u0,
                          collocation_residual, free_flight, update_step)
from .errors import DivergenceError
from .preconditioner import PreconditionerMatrices, build_preconditioner, verlet_solve
from .problems import SecondOrderIVP
from .quadrature import QuadratureRule


class GuessStrategy(Enum):
    COPY_INITIAL = "copy"
    VERLET_SWEEP = "verlet"
    RANDOM = "random"


_GUESS_ORDER = {GuessStrategy.COPY_INITIAL: 0,
                GuessStrategy.RANDOM: 0,
                GuessStrategy.VERLET_SWEEP: 2}


@dataclass
class SweeperConfig:
    rule: QuadratureRule
    K: int = 3
    initial_guess: GuessStrategy = GuessStrategy.COPY_INITIAL
    seed: int = 0
    residual_tol: float | None = None  # None: fixed K sweeps
    matrices: PreconditionerMatrices = field(default=None, repr=False)

    def __post_init__(self):
        if self.matrices is None:
            self.matrices = build_preconditioner(self.rule)

    @property
    def k0(self) -> int:
        """Approximation order of the starting procedure."""
        return _GUESS_ORDER[self.initial_guess]


def initial_guess(strategy: GuessStrategy, u0, problem: SecondOrderIVP,
                  dt: float, matrices: PreconditionerMatrices,
                  Mp1: int, seed: int = 0):
    """Starting iterate U^0 plus its node forces."""
    x0, v0 = _as_u0(u0, problem.d)
    if strategy is GuessStrategy.COPY_INITIAL:
        X = np.tile(x0, (Mp1, 1))
        V = np.tile(v0, (Mp1, 1))
        f0 = problem.f(x0, v0)
        return NodeState(X, V), np.tile(f0, (Mp1, 1))
    if strategy is GuessStrategy.VERLET_SWEEP:
        rhs_x = np.tile(x0, (Mp1, 1)) + dt * np.cumsum(
            np.concatenate(([0.0], matrices.dtau)))[:, None] * v0[None, :]
        rhs_v = np.tile(v0, (Mp1, 1))
        X, V, F = verlet_solve(problem, rhs_x, rhs_v, dt, matrices)
        return NodeState(X, V), F
    if strategy is GuessStrategy.RANDOM:
        rng = np.random.default_rng(seed)
        X = rng.uniform(-1.0, 1.0, size=(Mp1, problem.d))
        V = rng.uniform(-1.0, 1.0, size=(Mp1, problem.d))
        X[0], V[0] = x0, v0
        state = NodeState(X, V)
        return state, problem.f_nodes(X, V)
    raise ValueError(f"unknown strategy {strategy}")


def sdc_sweep(problem: SecondOrderIVP, prev: NodeState, u0, dt: float,
              config: SweeperConfig, prev_forces=None):
    """One correction sweep: velocity-Verlet pass with quadrature corrections.

    Solves (I - dt Q_vv F) U^{k+1} = dt (Q_coll - Q_vv) F(U^k) + C_coll U_0
    node by node.  Returns the new state and its node forces.
    """
    rule, pre = config.rule, config.matrices
    Fk = problem.f_nodes(prev.X, prev.V) if prev_forces is None else prev_forces
    ff = free_flight(u0, dt, rule, problem.d)
    rhs_x = ff.X + dt * dt * ((rule.QQ - pre.Qx) @ Fk)
    rhs_v = ff.V + dt * ((rule.Q - pre.QT) @ Fk)
    X, V, F = verlet_solve(problem, rhs_x, rhs_v, dt, pre, f0=Fk[0])
    return NodeState(X, V), F


def sdc_step(problem: SecondOrderIVP, u0, dt: float,
             config: SweeperConfig) -> StepResult:
    """One full SDC time step: starting guess, sweeps, quadrature update."""
    evals_before = problem.f_evals
    state, F = initial_guess(config.initial_guess, u0, problem, dt,
                             config.matrices, config.rule.M + 1, config.seed)
    iterations = 0
    residual = np.inf
    for _ in range(config.K):
        state, F = sdc_sweep(problem, state, u0, dt, config, prev_forces=F)
        iterations += 1
        if np.max(np.abs(state.X)) > DIVERGENCE_GUARD or \
                np.max(np.abs(state.V)) > DIVERGENCE_GUARD:
            raise DivergenceError(f"SDC iterate exceeded {DIVERGENCE_GUARD:g}")
        if config.residual_tol is not None:
            residual = collocation_residual(problem, state, u0, dt,
                                            config.rule, forces=F)
            if residual <= config.residual_tol:
                break
    x_end, v_end = update_step(state, u0, dt, config.rule, forces=F)
    return StepResult(x_end=x_end, v_end=v_end,
                      f_evals=problem.f_evals - evals_before,
                      iterations_used=iterations,
                      final_residual=float(residual) if np.isfinite(residual) else
                      collocation_residual(problem, state, u0, dt, config.rule, forces=F))


def integrate(problem: SecondOrderIVP, u0, t0: float, t_end: float, dt: float,
              config: SweeperConfig):
    """Serial time stepping from t0 to t_end; a final partial step is allowed.

    Returns (times, results) with times[i] the end time of results[i].
    """
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    x, v = _as_u0(u0, problem.d)
    t = t0
    times, results = [], []
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        step_dt = min(dt, t_end - t)
        res = sdc_step(problem, (x, v), step_dt, config)
        x, v = res.x_end, res.v_end
        t += step_dt
        times.append(t)
        results.append(res)
    return np.array(times), results
