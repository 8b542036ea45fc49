"""Fischer-Burmeister residuals and the reduced-space active-set solver."""

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import qp_enumerate, random_spd

from phasefrac.vi import (MCProblem, VIConfig, classify_active, fb_composite,
                          fb_phi, mcp_residual, rsls_solve)


def qp_problem(H, c, lower, upper):
    Hs = sp.csr_matrix(H)
    return MCProblem(residual=lambda x: Hs @ x + c,
                     jacobian=lambda x: Hs,
                     lower=np.asarray(lower, dtype=float),
                     upper=np.asarray(upper, dtype=float))


class TestFischerBurmeister:
    def test_point_values(self):
        assert fb_phi(0.0, 0.0) == 0.0
        assert fb_phi(3.0, 4.0) == pytest.approx(-2.0, abs=1e-14)
        assert fb_phi(-1.0, 0.0) == pytest.approx(2.0, abs=1e-14)

    def test_zero_iff_complementarity(self):
        # phi(a, b) = 0 exactly when a >= 0, b >= 0, ab = 0
        pts = [(0.0, 0.0), (0.0, 5.0), (7.0, 0.0)]
        for a, b in pts:
            assert abs(fb_phi(a, b)) <= 1e-12
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.uniform(-3, 3, size=2)
            comp = a >= 0 and b >= 0 and abs(a * b) <= 1e-15
            if comp:
                assert abs(fb_phi(a, b)) <= 1e-12
            elif abs(fb_phi(a, b)) <= 1e-12:
                assert a >= -1e-10 and b >= -1e-10 and abs(a * b) <= 1e-10

    def test_composite_one_sided_matches_simple(self):
        # with upper = +inf the two-sided residual reduces to phi(x-l, F)
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 2, size=8)
        F = rng.standard_normal(8)
        lower = np.zeros(8)
        upper = np.full(8, np.inf)
        got = fb_composite(x, F, lower, upper)
        want = np.array([fb_phi(xi, fi) for xi, fi in zip(x - lower, F)])
        assert np.allclose(got, want, atol=1e-14)

    def test_composite_zero_at_box_solution(self):
        H = np.array([[2.0, 0.0], [0.0, 2.0]])
        # minimize x'Hx/2 + c'x on [0,1]^2 with c = (-4, 1):
        # x0 hits upper bound 1 (F0 = 2-4 = -2 < 0), x1 hits lower 0 (F1 = 1 > 0)
        c = np.array([-4.0, 1.0])
        x = np.array([1.0, 0.0])
        r = fb_composite(x, H @ x + c, np.zeros(2), np.ones(2))
        assert np.max(np.abs(r)) <= 1e-14


class TestMCPResidual:
    def test_interior_root(self):
        p = qp_problem(np.eye(1), np.array([-2.0]), [0.0], [np.inf])
        assert abs(mcp_residual(np.array([2.0]), p)[0]) <= 1e-14

    def test_active_lower_root(self):
        p = qp_problem(np.eye(1), np.array([2.0]), [0.0], [np.inf])
        assert abs(mcp_residual(np.array([0.0]), p)[0]) <= 1e-14

    def test_infeasible_input_raises(self):
        p = qp_problem(np.eye(1), np.array([0.0]), [0.0], [1.0])
        with pytest.raises(ValueError):
            mcp_residual(np.array([-0.5]), p)
        with pytest.raises(ValueError):
            mcp_residual(np.array([1.5]), p)

    def test_zero_at_enumerated_qp_solution(self):
        rng = np.random.default_rng(2)
        H = random_spd(rng, 4)
        c = rng.standard_normal(4) * 2
        lower, upper = np.zeros(4), np.ones(4)
        x_star = qp_enumerate(H, c, lower, upper)
        p = qp_problem(H, c, lower, upper)
        assert np.max(np.abs(mcp_residual(x_star, p))) <= 1e-8


class TestClassifyActive:
    def test_lower_active_needs_positive_force(self):
        x = np.array([0.0, 0.5])
        F = np.array([2.0, 0.0])
        part = classify_active(x, F, np.zeros(2), np.full(2, np.inf), zeta=1e-10)
        assert list(part.lower) == [0]
        assert list(part.upper) == []
        assert list(part.inactive) == [1]

    def test_upper_active_needs_negative_force(self):
        x = np.array([1.0, 1.0])
        F = np.array([-3.0, 3.0])
        part = classify_active(x, F, np.zeros(2), np.ones(2), zeta=1e-10)
        assert list(part.upper) == [0]
        assert list(part.inactive) == [1]

    def test_touching_bound_with_wrong_sign_stays_inactive(self):
        x = np.array([0.0])
        F = np.array([-1.0])
        part = classify_active(x, F, np.zeros(1), np.full(1, np.inf), zeta=1e-10)
        assert list(part.inactive) == [0]

    def test_partition_is_exhaustive_and_disjoint(self):
        rng = np.random.default_rng(3)
        n = 30
        lower = np.where(rng.random(n) < 0.7, 0.0, -np.inf)
        upper = np.where(rng.random(n) < 0.7, 1.0, np.inf)
        x = np.clip(rng.uniform(-0.2, 1.2, n), lower, upper)
        F = rng.standard_normal(n)
        part = classify_active(x, F, lower, upper, zeta=1e-9)
        all_idx = np.sort(np.concatenate([part.lower, part.upper, part.inactive]))
        assert np.array_equal(all_idx, np.arange(n))


class TestRSLS:
    def test_scalar_interior(self):
        p = qp_problem(np.eye(1), np.array([-2.0]), [0.0], [np.inf])
        x, rep = rsls_solve(p, np.array([0.5]))
        assert rep.converged
        assert x[0] == pytest.approx(2.0, abs=1e-10)

    def test_scalar_bound(self):
        p = qp_problem(np.eye(1), np.array([2.0]), [0.0], [np.inf])
        x, rep = rsls_solve(p, np.array([0.5]))
        assert rep.converged
        assert x[0] == pytest.approx(0.0, abs=1e-10)

    def test_box_qp_matches_enumeration(self):
        rng = np.random.default_rng(4)
        H = random_spd(rng, 6)
        c = rng.standard_normal(6) * 2
        lower, upper = np.zeros(6), np.ones(6)
        x_star = qp_enumerate(H, c, lower, upper)
        x, rep = rsls_solve(qp_problem(H, c, lower, upper), np.full(6, 0.5))
        assert rep.converged
        assert np.allclose(x, x_star, atol=1e-8)

    def test_iterates_exactly_feasible(self):
        rng = np.random.default_rng(5)
        H = random_spd(rng, 10)
        c = rng.standard_normal(10) * 3
        lower, upper = np.zeros(10), np.ones(10)
        seen = []

        def spy(x):
            seen.append(x.copy())
            return sp.csr_matrix(H)

        p = MCProblem(residual=lambda x: H @ x + c, jacobian=spy,
                      lower=lower, upper=upper)
        x, rep = rsls_solve(p, np.full(10, 0.5))
        assert rep.converged
        for xk in seen + [x]:
            assert np.all(xk >= lower) and np.all(xk <= upper)

    def test_merit_nonincreasing(self):
        rng = np.random.default_rng(6)
        H = random_spd(rng, 12)
        c = rng.standard_normal(12) * 3
        p = qp_problem(H, c, np.zeros(12), np.ones(12))
        _, rep = rsls_solve(p, np.full(12, 0.5))
        assert rep.converged
        hist = np.asarray(rep.residual_history)
        assert np.all(np.diff(hist) <= 1e-12 * hist[0])

    def test_large_affine_problem_fast(self):
        rng = np.random.default_rng(7)
        n = 200
        H = random_spd(rng, n, shift=float(n))
        c = rng.standard_normal(n) * 5
        p = qp_problem(H, c, np.zeros(n), np.full(n, np.inf))
        x, rep = rsls_solve(p, np.zeros(n))
        assert rep.converged
        assert rep.iterations <= 30
        assert np.max(np.abs(mcp_residual(x, p))) <= 1e-7

    def test_infeasible_start_is_clipped(self):
        p = qp_problem(np.eye(2), np.array([-0.5, -0.5]), [0.0, 0.0], [1.0, 1.0])
        x, rep = rsls_solve(p, np.array([5.0, -5.0]))
        assert rep.converged
        assert np.allclose(x, [0.5, 0.5], atol=1e-10)

    def test_two_sided_box_with_mixed_activity(self):
        H = np.diag([1.0, 1.0, 1.0])
        c = np.array([-5.0, 5.0, -0.25])
        p = qp_problem(H, c, np.zeros(3), np.ones(3))
        x, rep = rsls_solve(p, np.full(3, 0.5))
        assert rep.converged
        assert np.allclose(x, [1.0, 0.0, 0.25], atol=1e-10)

    def test_invalid_bounds_raise(self):
        with pytest.raises(ValueError):
            MCProblem(residual=lambda x: x, jacobian=lambda x: sp.eye(2),
                      lower=np.array([0.0, 2.0]), upper=np.array([1.0, 1.0]))

    def test_config_knobs_respected(self):
        p = qp_problem(np.eye(1), np.array([-2.0]), [0.0], [np.inf])
        _, rep = rsls_solve(p, np.array([0.0]), config=VIConfig(max_iterations=1))
        assert rep.iterations <= 1
