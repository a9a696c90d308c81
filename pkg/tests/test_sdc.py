import numpy as np
import pytest

from vvsdc import (DivergenceError, GuessStrategy, NodeFamily, NodeState,
                   SweeperConfig, build_preconditioner, build_rule,
                   collocation_residual, free_flight, initial_guess, integrate,
                   make_oscillator, make_penning, picard_iterate, sdc_step,
                   sdc_sweep, solve_collocation_linear, update_step)
from vvsdc.baselines import verlet_step
from vvsdc.problems import _linear_problem

RULE3 = build_rule(NodeFamily.GAUSS_LEGENDRE, 3)
PRE3 = build_preconditioner(RULE3)


class TestInitialGuess:
    def test_copy_initial(self):
        problem = make_oscillator(1.0, 0.0)
        state, _ = initial_guess(GuessStrategy.COPY_INITIAL,
                                 (np.array([1.0]), np.array([2.0])),
                                 problem, 0.5, PRE3, 4)
        assert state.X == pytest.approx(np.ones((4, 1)))
        assert state.V == pytest.approx(2.0 * np.ones((4, 1)))

    def test_verlet_free_flight(self):
        problem = make_oscillator(0.0, 0.0)
        u0 = (np.array([1.0]), np.array([2.0]))
        state, _ = initial_guess(GuessStrategy.VERLET_SWEEP, u0, problem,
                                 0.5, PRE3, 4)
        ff = free_flight(u0, 0.5, RULE3, 1)
        assert state.X == pytest.approx(ff.X, abs=1e-14)
        assert state.V == pytest.approx(ff.V, abs=1e-14)

    def test_random_deterministic(self):
        problem = make_oscillator(1.0, 0.0)
        u0 = (np.array([1.0]), np.array([2.0]))
        a, _ = initial_guess(GuessStrategy.RANDOM, u0, problem, 0.5, PRE3, 4,
                             seed=42)
        b, _ = initial_guess(GuessStrategy.RANDOM, u0, problem, 0.5, PRE3, 4,
                             seed=42)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.V, b.V)
        assert a.X[0, 0] == 1.0 and a.V[0, 0] == 2.0
        assert np.all(np.abs(a.X[1:]) <= 1.0)

    def test_k0_property(self):
        cfg = SweeperConfig(rule=RULE3, initial_guess=GuessStrategy.VERLET_SWEEP)
        assert cfg.k0 == 2
        assert SweeperConfig(rule=RULE3).k0 == 0


class TestSweep:
    def test_fixed_point(self):
        problem = make_oscillator(1.0, 0.5)
        u0 = (np.array([1.0]), np.array([0.0]))
        dt = 0.4
        cfg = SweeperConfig(rule=RULE3)
        state = solve_collocation_linear(problem, u0, dt, RULE3)
        after, _ = sdc_sweep(problem, state, u0, dt, cfg)
        assert after.X == pytest.approx(state.X, abs=1e-12)
        assert after.V == pytest.approx(state.V, abs=1e-12)

    def test_defining_equation_on_random_linear_problems(self):
        # (I - dt Q_vv F) U^{k+1} = dt (Q_coll - Q_vv) F(U^k) + C_coll U_0
        rng = np.random.default_rng(11)
        for _ in range(30):
            d = int(rng.integers(1, 4))
            M = int(rng.integers(1, 6))
            rule = build_rule(NodeFamily.GAUSS_LEGENDRE, M)
            pre = build_preconditioner(rule)
            cfg = SweeperConfig(rule=rule)
            problem = _linear_problem(rng.normal(size=(d, d)),
                                      rng.normal(size=(d, d)))
            A_x, A_v = problem.linear_parts
            dt = float(rng.uniform(0.05, 0.5))
            u0 = (rng.normal(size=d), rng.normal(size=d))
            prev = NodeState(rng.normal(size=(M + 1, d)),
                             rng.normal(size=(M + 1, d)))
            prev.X[0], prev.V[0] = u0
            new, _ = sdc_sweep(problem, prev, u0, dt, cfg)
            Fk = prev.X @ A_x.T + prev.V @ A_v.T
            Fk1 = new.X @ A_x.T + new.V @ A_v.T
            ff = free_flight(u0, dt, rule, d)
            lhs_x = new.X - dt * dt * (pre.Qx @ Fk1)
            rhs_x = ff.X + dt * dt * ((rule.QQ - pre.Qx) @ Fk)
            lhs_v = new.V - dt * (pre.QT @ Fk1)
            rhs_v = ff.V + dt * ((rule.Q - pre.QT) @ Fk)
            assert lhs_x == pytest.approx(rhs_x, abs=1e-10)
            assert lhs_v == pytest.approx(rhs_v, abs=1e-10)

    def test_explicit_when_velocity_independent(self):
        # f independent of v: no implicit solve, so the per-sweep eval
        # count is exactly M (one per node past node 0)
        problem = make_oscillator(2.0, 0.0)
        u0 = (np.array([1.0]), np.array([0.0]))
        cfg = SweeperConfig(rule=RULE3)
        state, F = initial_guess(GuessStrategy.COPY_INITIAL, u0, problem,
                                 0.1, PRE3, 4)
        before = problem.f_evals
        sdc_sweep(problem, state, u0, 0.1, cfg, prev_forces=F)
        assert problem.f_evals - before == RULE3.M


class TestStep:
    def test_K0_verlet_guess_is_plain_verlet(self):
        problem = make_penning()
        u0 = (np.array([10.0, 0.0, 0.0]), np.array([100.0, 0.0, 100.0]))
        dt = 0.02
        cfg = SweeperConfig(rule=RULE3, K=0,
                            initial_guess=GuessStrategy.VERLET_SWEEP)
        res = sdc_step(problem, u0, dt, cfg)
        # reference: velocity-Verlet over the node sub-steps, then the
        # quadrature update from those node values
        x, v = u0
        X = [x]
        V = [v]
        ref = make_penning()
        for sub in PRE3.dtau * dt:
            x, v, f = verlet_step(ref, x, v, sub)
            X.append(x)
            V.append(v)
        state = NodeState(np.array(X), np.array(V))
        x_end, v_end = update_step(state, u0, dt, RULE3, problem=ref)
        assert res.x_end == pytest.approx(x_end, abs=1e-10)
        assert res.v_end == pytest.approx(v_end, abs=1e-10)

    def test_free_flight_any_K(self):
        problem = make_oscillator(0.0, 0.0)
        u0 = (np.array([1.0]), np.array([2.0]))
        for K in (0, 1, 5):
            cfg = SweeperConfig(rule=RULE3, K=K,
                                initial_guess=GuessStrategy.VERLET_SWEEP)
            res = sdc_step(problem, u0, 0.5, cfg)
            assert res.x_end[0] == pytest.approx(2.0, abs=1e-14)
            assert res.v_end[0] == pytest.approx(2.0, abs=1e-14)

    def test_large_K_matches_collocation(self):
        problem = make_penning()
        u0 = (np.array([10.0, 0.0, 0.0]), np.array([100.0, 0.0, 100.0]))
        rule = build_rule(NodeFamily.GAUSS_LEGENDRE, 5)
        dt = 0.01
        cfg = SweeperConfig(rule=rule, K=20)
        res = sdc_step(problem, u0, dt, cfg)
        ref_problem = make_penning()
        state, _, F = picard_iterate(ref_problem, u0, dt, rule, K=80)
        x_ref, v_ref = update_step(state, u0, dt, rule, forces=F)
        assert res.x_end == pytest.approx(x_ref, abs=1e-10)
        assert res.v_end == pytest.approx(v_ref, abs=1e-10)

    def test_f_eval_accounting_verlet_guess(self):
        # linear-in-v closed-form node solves: M (K + 1) + 1 evals per step
        for K in (0, 1, 3):
            problem = make_penning()
            u0 = (np.array([10.0, 0.0, 0.0]), np.array([100.0, 0.0, 100.0]))
            cfg = SweeperConfig(rule=RULE3, K=K,
                                initial_guess=GuessStrategy.VERLET_SWEEP)
            res = sdc_step(problem, u0, 0.01, cfg)
            assert res.f_evals == RULE3.M * (K + 1) + 1

    def test_f_eval_accounting_copy_guess(self):
        for K in (1, 3):
            problem = make_penning()
            u0 = (np.array([10.0, 0.0, 0.0]), np.array([100.0, 0.0, 100.0]))
            cfg = SweeperConfig(rule=RULE3, K=K)
            res = sdc_step(problem, u0, 0.01, cfg)
            assert res.f_evals == RULE3.M * K + 1

    def test_residual_stopping(self):
        problem = make_oscillator(1.0, 0.0)
        u0 = (np.array([1.0]), np.array([0.0]))
        cfg = SweeperConfig(rule=RULE3, K=50, residual_tol=1e-12)
        res = sdc_step(problem, u0, 0.3, cfg)
        assert res.iterations_used < 50
        assert res.final_residual <= 1e-12

    def test_divergence_guard(self):
        problem = make_oscillator(30.0, 0.0)
        u0 = (np.array([1.0]), np.array([0.0]))
        cfg = SweeperConfig(rule=RULE3, K=400)
        with pytest.raises(DivergenceError):
            sdc_step(problem, u0, 1.0, cfg)


class TestIntegrate:
    def test_one_step_equals_sdc_step(self):
        problem = make_oscillator(1.0, 0.2)
        u0 = (np.array([1.0]), np.array([0.0]))
        cfg = SweeperConfig(rule=RULE3, K=3)
        _, results = integrate(make_oscillator(1.0, 0.2), u0, 0.0, 0.4, 0.4, cfg)
        direct = sdc_step(problem, u0, 0.4, cfg)
        assert len(results) == 1
        assert results[0].x_end == pytest.approx(direct.x_end)
        assert results[0].v_end == pytest.approx(direct.v_end)

    def test_free_flight_many_steps(self):
        problem = make_oscillator(0.0, 0.0)
        u0 = (np.array([1.0]), np.array([2.0]))
        cfg = SweeperConfig(rule=RULE3, K=2)
        times, results = integrate(problem, u0, 0.0, 1.0, 0.1, cfg)
        assert times[-1] == pytest.approx(1.0)
        assert results[-1].x_end[0] == pytest.approx(3.0, abs=1e-12)

    def test_partial_final_step(self):
        problem = make_oscillator(1.0, 0.0)
        u0 = (np.array([1.0]), np.array([0.0]))
        cfg = SweeperConfig(rule=RULE3, K=3)
        times, results = integrate(problem, u0, 0.0, 0.25, 0.1, cfg)
        assert len(results) == 3
        assert times[-1] == pytest.approx(0.25)

    def test_bad_interval(self):
        problem = make_oscillator(1.0, 0.0)
        cfg = SweeperConfig(rule=RULE3)
        with pytest.raises(ValueError):
            integrate(problem, (np.array([1.0]), np.array([0.0])),
                      1.0, 1.0, 0.1, cfg)
