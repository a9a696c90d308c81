import numpy as np
import pytest

from vvsdc import (NodeFamily, SolverError, build_preconditioner, build_rule,
                   make_oscillator, verlet_solve)
from vvsdc.problems import SecondOrderIVP, _linear_problem


def test_legendre_M1_matrices():
    pre = build_preconditioner(build_rule(NodeFamily.GAUSS_LEGENDRE, 1))
    assert pre.QE == pytest.approx(np.array([[0.0, 0.0], [0.5, 0.0]]))
    assert pre.QI == pytest.approx(np.array([[0.0, 0.0], [0.0, 0.5]]))
    assert pre.QT == pytest.approx(np.array([[0.0, 0.0], [0.25, 0.25]]))
    assert pre.Qx == pytest.approx(np.array([[0.0, 0.0], [0.125, 0.0]]))
    assert pre.dtau == pytest.approx([0.5])


def test_triangular_structure():
    for family in NodeFamily:
        for M in range(2, 8):
            pre = build_preconditioner(build_rule(family, M))
            assert np.allclose(pre.QE, np.tril(pre.QE, -1))
            assert np.allclose(pre.Qx, np.tril(pre.Qx, -1))
            assert np.allclose(pre.QI, np.tril(pre.QI))
            assert np.all(pre.QI[:, 0] == 0)
            assert pre.QT == pytest.approx(0.5 * (pre.QE + pre.QI))
            assert pre.Qx == pytest.approx(pre.QE @ pre.QT + 0.5 * pre.QE * pre.QE)


def test_dtau_nonnegative_and_bounded():
    # Lobatto rules start at tau = 0, so their first spacing is zero
    for family in NodeFamily:
        for M in range(2, 10):
            pre = build_preconditioner(build_rule(family, M))
            assert np.all(pre.dtau >= 0)
            assert np.all(pre.dtau[1:] > 0)
            assert pre.dtau.sum() <= 1.0 + 1e-12


def test_norm_bounds():
    for family in NodeFamily:
        for M in range(2, 13):
            pre = build_preconditioner(build_rule(family, M))
            assert np.abs(pre.QT).sum(axis=1).max() <= 1.0 + 1e-12
            assert np.abs(pre.Qx).sum(axis=1).max() <= 1.5 + 1e-12


def test_verlet_solve_zero_force():
    rule = build_rule(NodeFamily.GAUSS_LEGENDRE, 3)
    pre = build_preconditioner(rule)
    problem = make_oscillator(0.0, 0.0)
    rhs_x = np.arange(4.0).reshape(4, 1)
    rhs_v = np.ones((4, 1))
    X, V, F = verlet_solve(problem, rhs_x, rhs_v, 0.7, pre)
    assert X == pytest.approx(rhs_x)
    assert V == pytest.approx(rhs_v)
    assert F == pytest.approx(np.zeros((4, 1)))


def test_verlet_solve_hand_example():
    # f(x, v) = -v, one interior node at tau = 1/2, dt = 1,
    # rhs = (x: (0, 0), v: (1, 1)):
    #   node-1 velocity solves v = 1 + 1/4 (-1 - v)  ->  v = 0.6
    #   node-1 position is 0 + Qx_{1,0} f_0 = 0.125 * (-1) = -0.125
    rule = build_rule(NodeFamily.GAUSS_LEGENDRE, 1)
    pre = build_preconditioner(rule)
    problem = make_oscillator(0.0, 1.0)
    X, V, _ = verlet_solve(problem, np.zeros((2, 1)), np.ones((2, 1)), 1.0, pre)
    assert V[1, 0] == pytest.approx(0.6)
    assert X[1, 0] == pytest.approx(-0.125)


def _dense_solve(problem, rhs_x, rhs_v, dt, pre):
    """Brute-force solve of (I - dt Q_vv F) U = rhs via one block system."""
    Mp1, d = rhs_x.shape
    A_x, A_v = problem.linear_parts
    QxB = np.kron(pre.Qx, np.eye(d))
    QTB = np.kron(pre.QT, np.eye(d))
    FxB = np.kron(np.eye(Mp1), A_x)
    FvB = np.kron(np.eye(Mp1), A_v)
    n = Mp1 * d
    A = np.block([
        [np.eye(n) - dt * dt * QxB @ FxB, -dt * dt * QxB @ FvB],
        [-dt * QTB @ FxB, np.eye(n) - dt * QTB @ FvB],
    ])
    sol = np.linalg.solve(A, np.concatenate([rhs_x.ravel(), rhs_v.ravel()]))
    return sol[:n].reshape(Mp1, d), sol[n:].reshape(Mp1, d)


def test_verlet_solve_matches_dense_solve():
    rng = np.random.default_rng(7)
    for _ in range(40):
        d = int(rng.integers(1, 4))
        M = int(rng.integers(1, 6))
        family = NodeFamily.GAUSS_LEGENDRE
        rule = build_rule(family, M)
        pre = build_preconditioner(rule)
        problem = _linear_problem(rng.normal(size=(d, d)), rng.normal(size=(d, d)))
        dt = float(rng.uniform(0.05, 0.5))
        rhs_x = rng.normal(size=(M + 1, d))
        rhs_v = rng.normal(size=(M + 1, d))
        X, V, F = verlet_solve(problem, rhs_x, rhs_v, dt, pre)
        Xd, Vd = _dense_solve(problem, rhs_x, rhs_v, dt, pre)
        assert X == pytest.approx(Xd, abs=1e-10)
        assert V == pytest.approx(Vd, abs=1e-10)
        # residual of the defining equation
        A_x, A_v = problem.linear_parts
        Fd = (X @ A_x.T) + (V @ A_v.T)
        assert F == pytest.approx(Fd, abs=1e-10)
        assert X - dt * dt * (pre.Qx @ Fd) == pytest.approx(rhs_x, abs=1e-12)
        assert V - dt * (pre.QT @ Fd) == pytest.approx(rhs_v, abs=1e-12)


def test_nonlinear_velocity_solve_and_failure():
    # fixed-point path for a genuinely nonlinear velocity dependence
    problem = SecondOrderIVP(
        d=1,
        force=lambda x, v: np.array([-0.3 * np.sin(v[0]) - x[0]]),
        velocity_dependent=np.array([True]))
    rule = build_rule(NodeFamily.GAUSS_LEGENDRE, 2)
    pre = build_preconditioner(rule)
    rhs_x = np.full((3, 1), 0.2)
    rhs_v = np.full((3, 1), 0.5)
    X, V, F = verlet_solve(problem, rhs_x, rhs_v, 0.3, pre)
    dt = 0.3
    res_v = V - dt * (pre.QT @ F) - rhs_v
    assert np.max(np.abs(res_v)) < 1e-11

    # a contraction factor above one makes the fixed point unreachable
    stiff = SecondOrderIVP(
        d=1,
        force=lambda x, v: np.array([50.0 * v[0]]),
        velocity_dependent=np.array([True]))
    with pytest.raises(SolverError):
        verlet_solve(stiff, rhs_x, rhs_v, 0.3, pre)
