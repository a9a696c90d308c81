"""Reference integrators: plain velocity-Verlet and the RK4 baseline."""
from __future__ import annotations

import numpy as np

from .preconditioner import _solve_node_velocity
from .problems import SecondOrderIVP


def verlet_step(problem: SecondOrderIVP, x, v, dt: float, f_prev=None):
    """One velocity-Verlet step.

    Passing ``f_prev`` (the trailing force of the previous step) reuses it,
    so a long run costs one new force evaluation per step.  Returns
    (x', v', f') with f' the force at the new state.
    """
    x = np.atleast_1d(np.asarray(x, float))
    v = np.atleast_1d(np.asarray(v, float))
    f0 = problem.f(x, v) if f_prev is None else np.asarray(f_prev, float)
    x_new = x + dt * (v + 0.5 * dt * f0)
    # v' = v + dt/2 (f0 + f(x', v')); implicit only if f depends on v
    b = v + 0.5 * dt * f0
    v_new, f_new = _solve_node_velocity(problem, x_new, b, 0.5 * dt, node=None)
    return x_new, v_new, f_new


def integrate_verlet(problem: SecondOrderIVP, u0, t0: float, t_end: float,
                     dt: float):
    """Velocity-Verlet run; returns (times, xs, vs) arrays over the steps."""
    x, v = np.atleast_1d(np.asarray(u0[0], float)), np.atleast_1d(np.asarray(u0[1], float))
    f = None
    t = t0
    times, xs, vs = [], [], []
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        step_dt = min(dt, t_end - t)
        if step_dt != dt:
            f = None  # spacing changed, trailing force no longer matches
        x, v, f = verlet_step(problem, x, v, step_dt, f_prev=f)
        t += step_dt
        times.append(t)
        xs.append(x)
        vs.append(v)
    return np.array(times), np.array(xs), np.array(vs)


def rkn4_step(problem: SecondOrderIVP, x, v, dt: float):
    """Classical four-stage RK4 on the companion first-order system.

    This is the artifact's fourth-order Runge-Kutta-Nystrom stand-in; it
    costs four force evaluations per step.
    """
    x = np.atleast_1d(np.asarray(x, float))
    v = np.atleast_1d(np.asarray(v, float))
    k1x, k1v = v, problem.f(x, v)
    k2x, k2v = v + 0.5 * dt * k1v, problem.f(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = v + 0.5 * dt * k2v, problem.f(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = v + dt * k3v, problem.f(x + dt * k3x, v + dt * k3v)
    x_new = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return x_new, v_new


def integrate_rkn4(problem: SecondOrderIVP, u0, t0: float, t_end: float,
                   dt: float):
    x, v = np.atleast_1d(np.asarray(u0[0], float)), np.atleast_1d(np.asarray(u0[1], float))
    t = t0
    times, xs, vs = [], [], []
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        step_dt = min(dt, t_end - t)
        x, v = rkn4_step(problem, x, v, step_dt)
        t += step_dt
        times.append(t)
        xs.append(x)
        vs.append(v)
    return np.array(times), np.array(xs), np.array(vs)
