"""Matrix numerics: Riccati integration/solving, eigen utilities, RK4."""

from __future__ import annotations

import numpy as np
import pytest

from rol.errors import DivergenceError
from rol.synthesis import graph_shape_penalty
from rol.numerics import (
    integrate_dre,
    integrate_ode,
    pbh_stabilizable,
    rk4_step,
    solve_filter_are,
    spectral_abscissa,
    sym_eig_bounds,
    symmetrize,
)


def _const(M):
    M = np.asarray(M, dtype=float)
    return lambda t: M


def _scalar_lyapunov_solution(t, y0=1.0):
    # closed form of  dy/dt = -2 y + 1  from y(0) = y0
    return 0.5 + (y0 - 0.5) * np.exp(-2.0 * t)


# ---------------------------------------------------------------------------
# Riccati differential equation
# ---------------------------------------------------------------------------


class TestIntegrateDre:
    def test_stationary_point_stays_put(self):
        Z = np.zeros((3, 3))
        res = integrate_dre(_const(Z), _const(Z), _const(Z), np.eye(3), 0.0, 5.0, 1e-3)
        assert res.bounded
        assert np.allclose(res.Y, np.eye(3), atol=1e-14)

    def test_scalar_lyapunov_matches_closed_form(self):
        # dy/dt = a y + y a + b^2 with a = -1, b = 1:  y -> 1/2
        a = np.array([[-1.0]])
        q = np.array([[1.0]])
        s = np.zeros((1, 1))
        res = integrate_dre(
            _const(a), _const(q), _const(s), np.array([[1.0]]),
            0.0, 10.0, 1e-3, store_every=100,
        )
        assert res.bounded
        assert res.Y[0, 0] == pytest.approx(0.5, abs=1e-8)
        exact = _scalar_lyapunov_solution(res.times)
        assert np.max(np.abs(res.trajectory[:, 0, 0] - exact)) < 1e-8

    def test_unstable_drift_reports_unbounded(self):
        a = np.array([[1.0]])
        res = integrate_dre(
            _const(a), _const(np.array([[1.0]])), _const(np.zeros((1, 1))),
            np.array([[1.0]]), 0.0, 20.0, 1e-3, bound=1e8,
        )
        assert not res.bounded
        assert res.t_escape is not None and 0.0 < res.t_escape <= 20.0
        assert res.bound_estimate > 1e8

    def test_every_stored_sample_is_symmetric(self):
        rng = np.random.default_rng(3)
        A = rng.standard_normal((4, 4)) - 3.0 * np.eye(4)
        B = rng.standard_normal((4, 2))
        C = rng.standard_normal((2, 4))
        res = integrate_dre(
            _const(A), _const(B @ B.T), _const(C.T @ C), np.eye(4),
            0.0, 3.0, 1e-3, store_every=50,
        )
        assert res.bounded
        for Y in res.trajectory:
            assert np.linalg.norm(Y - Y.T) <= 1e-8 * np.linalg.norm(Y)

    def test_batched_nodes_integrate_together(self):
        # two decoupled scalar problems in one batch; one diverges, so the
        # batch as a whole is flagged unbounded
        A = np.stack([np.array([[-1.0]]), np.array([[1.0]])])
        Q = np.ones((2, 1, 1))
        S = np.zeros((2, 1, 1))
        res = integrate_dre(
            _const(A), _const(Q), _const(S), np.ones((2, 1, 1)), 0.0, 20.0, 1e-3
        )
        assert not res.bounded

    def test_step_halving_shows_fourth_order(self):
        a = np.array([[-1.0]])
        q = np.array([[1.0]])
        s = np.array([[0.4]])
        errs = []
        for h in (0.2, 0.1, 0.05):
            res = integrate_dre(
                _const(a), _const(q), _const(s), np.array([[1.0]]), 0.0, 2.0, h
            )
            ref = integrate_dre(
                _const(a), _const(q), _const(s), np.array([[1.0]]), 0.0, 2.0, 1e-4
            )
            errs.append(abs(res.Y[0, 0] - ref.Y[0, 0]))
        order01 = np.log2(errs[0] / errs[1])
        order12 = np.log2(errs[1] / errs[2])
        assert min(order01, order12) >= 3.5


# ---------------------------------------------------------------------------
# Algebraic Riccati equation
# ---------------------------------------------------------------------------


class TestSolveFilterAre:
    def test_scalar_lyapunov_limit(self):
        Y = solve_filter_are(
            np.array([[-1.0]]), np.array([[1.0]]), np.zeros((1, 1))
        )
        assert Y is not None
        assert Y[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_identity_fixed_point(self):
        Y = solve_filter_are(np.zeros((3, 3)), np.eye(3), np.eye(3))
        assert Y is not None
        assert np.allclose(Y, np.eye(3), atol=1e-10)

    def test_near_axis_hamiltonian_reports_no_solution(self):
        # a = 0, s = 0, q = 1: the Hamiltonian has a double eigenvalue at 0,
        # so no stable/antistable splitting exists
        assert solve_filter_are(np.zeros((1, 1)), np.ones((1, 1)), np.zeros((1, 1))) is None

    def test_random_problems_satisfy_residual_and_stability(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            A = rng.standard_normal((n, n))
            B = rng.standard_normal((n, n))
            C = rng.standard_normal((2, n))
            Q = B @ B.T + 1e-6 * np.eye(n)
            S = C.T @ C + 1e-6 * np.eye(n)
            Y = solve_filter_are(A, Q, S)
            assert Y is not None
            assert np.array_equal(Y, Y.T)  # exactly symmetric by construction
            residual = np.linalg.norm(A @ Y + Y @ A.T + Q - Y @ S @ Y)
            assert residual <= 1e-8 * (1.0 + np.linalg.norm(Y) ** 2)
            assert spectral_abscissa(A - Y @ S) < 0.0
            assert np.linalg.eigvalsh(Y)[0] >= -1e-8 * (1.0 + np.linalg.norm(Y))

    def test_dre_converges_to_are_on_constant_problems(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((4, 4)) - 2.0 * np.eye(4)
        B = rng.standard_normal((4, 3))
        C = rng.standard_normal((2, 4))
        Q = B @ B.T
        S = C.T @ C + 1e-3 * np.eye(4)
        Y_are = solve_filter_are(A, Q, S)
        assert Y_are is not None
        decay = abs(spectral_abscissa(A - Y_are @ S))
        T = 20.0 / decay
        res = integrate_dre(_const(A), _const(Q), _const(S), np.eye(4), 0.0, T, 1e-3)
        assert res.bounded
        gap = np.linalg.norm(res.Y - Y_are)
        assert gap <= 1e-6 * (1.0 + np.linalg.norm(Y_are))


# ---------------------------------------------------------------------------
# ODE integration
# ---------------------------------------------------------------------------


class TestIntegrateOde:
    def test_zero_field_is_constant(self):
        t, y = integrate_ode(lambda t, y: 0.0 * y, np.array([3.0, -1.0]), 0.0, 2.0, 0.01)
        assert t == pytest.approx(2.0)
        assert np.array_equal(y, np.array([3.0, -1.0]))

    def test_exponential_decay_matches_closed_form(self):
        _, y = integrate_ode(lambda t, y: -y, np.array([1.0]), 0.0, 1.0, 1e-3)
        assert abs(y[0] - np.exp(-1.0)) < 1e-8

    def test_growth_past_limit_raises_divergence(self):
        with pytest.raises(DivergenceError, match="diverged at t="):
            integrate_ode(lambda t, y: y, np.array([1.0]), 0.0, 40.0, 1e-2)

    def test_observer_sees_every_step(self):
        seen = []
        integrate_ode(
            lambda t, y: -y, np.array([1.0]), 0.0, 1.0, 0.25,
            observer=lambda k, t, y: seen.append((k, t)),
        )
        assert [k for k, _ in seen] == [0, 1, 2, 3]
        assert seen[-1][1] == pytest.approx(1.0)

    def test_rk4_single_step_order(self):
        # local truncation error of one RK4 step is O(h^5)
        f = lambda t, y: -y
        errs = []
        for h in (0.2, 0.1):
            y = rk4_step(f, 0.0, np.array([1.0]), h)
            errs.append(abs(y[0] - np.exp(-h)))
        assert np.log2(errs[0] / errs[1]) >= 4.5


# ---------------------------------------------------------------------------
# Eigen utilities
# ---------------------------------------------------------------------------


class TestEigUtilities:
    def test_identity_bounds(self):
        assert sym_eig_bounds(np.eye(6)) == (1.0, 1.0)

    def test_diagonal_bounds(self):
        lo, hi = sym_eig_bounds(np.diag([-2.0, 3.0]))
        assert lo == pytest.approx(-2.0) and hi == pytest.approx(3.0)

    def test_ring_penalty_matches_circulant_formula(self, scenario):
        # the 6-node directed ring gives a circulant symmetric penalty whose
        # eigenvalues are 2 - 2 cos(2 pi k / 6), shifted by the in-degree
        pen = graph_shape_penalty(scenario.graph, 1)
        lo, hi = sym_eig_bounds(pen)
        ks = np.arange(6)
        exact = 1.0 - 2.0 * np.cos(2.0 * np.pi * ks / 6.0)
        assert lo == pytest.approx(exact.min(), abs=1e-10)
        assert hi == pytest.approx(exact.max(), abs=1e-10)

    def test_asymmetric_input_rejected(self):
        with pytest.raises(ValueError, match="not symmetric"):
            sym_eig_bounds(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_symmetrize(self):
        M = np.array([[0.0, 2.0], [0.0, 0.0]])
        assert np.array_equal(symmetrize(M), np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_spectral_abscissa_diagonal(self):
        assert spectral_abscissa(np.diag([-1.0, -2.0])) == pytest.approx(-1.0)

    def test_spectral_abscissa_rotation(self):
        assert spectral_abscissa(np.array([[0.0, 1.0], [-1.0, 0.0]])) == pytest.approx(0.0, abs=1e-12)

    def test_pbh_stabilizable_cases(self):
        A = np.diag([1.0, -1.0])
        e1 = np.array([[1.0], [0.0]])
        e2 = np.array([[0.0], [1.0]])
        assert pbh_stabilizable(A, e1)        # unstable mode reachable
        assert not pbh_stabilizable(A, e2)    # unstable mode unreachable
        assert pbh_stabilizable(-np.eye(3), np.zeros((3, 1)))  # already stable
