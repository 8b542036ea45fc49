"""Shared fixtures and independent oracles for the test suite.

The oracles here are deliberately naive (dense linear algebra, brute-force
enumeration, central finite differences) so they cannot share bugs with the
library's optimized implementations.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from phasefrac.fem import Discretization, State
from phasefrac.mesh import rect_mesh
from phasefrac.model import Material


def fd_gradient(f, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    g = np.zeros_like(x)
    for i in range(x.size):
        h = rel_step * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def fd_jacobian(F, x: np.ndarray, rel_step: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of a vector function, column by column."""
    cols = []
    for i in range(x.size):
        h = rel_step * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((F(xp) - F(xm)) / (2.0 * h))
    return np.column_stack(cols)


def qp_enumerate(H: np.ndarray, c: np.ndarray, lower: np.ndarray,
                 upper: np.ndarray) -> np.ndarray:
    """Solve min 1/2 x'Hx + c'x over [lower, upper] by active-set enumeration.

    Tries all 3^n assignments of each coordinate to {lower, free, upper},
    solves the free block exactly, and returns the assignment satisfying
    primal feasibility and the KKT sign conditions.  Only sensible for SPD H
    and small n, which is exactly what an oracle needs to be.
    """
    n = H.shape[0]
    best = None
    best_val = np.inf
    for assignment in itertools.product((-1, 0, 1), repeat=n):
        a = np.array(assignment)
        x = np.where(a == -1, lower, np.where(a == 1, upper, 0.0))
        free = np.flatnonzero(a == 0)
        fixed = np.flatnonzero(a != 0)
        if free.size:
            rhs = -(c[free] + H[np.ix_(free, fixed)] @ x[fixed])
            try:
                x[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
            except np.linalg.LinAlgError:
                continue
        tol = 1e-9
        if np.any(x < lower - tol) or np.any(x > upper + tol):
            continue
        g = H @ x + c
        if np.any(g[a == -1] < -tol) or np.any(g[a == 1] > tol):
            continue
        if free.size and np.any(np.abs(g[free]) > 1e-7 * (1 + np.abs(g[free]))):
            continue
        val = 0.5 * x @ H @ x + c @ x
        if val < best_val - 1e-15:
            best_val = val
            best = np.clip(x, lower, upper)
    assert best is not None, "enumeration oracle found no KKT point"
    return best


def random_spd(rng: np.random.Generator, n: int, shift: float = 1.0) -> np.ndarray:
    A = rng.standard_normal((n, n))
    return A @ A.T + shift * np.eye(n)


def random_feasible_state(problem: Discretization,
                          rng: np.random.Generator,
                          lb_scale: float = 0.3) -> State:
    """Random displacement and a random damage field strictly inside its box."""
    nv = problem.n_vertices
    lb = rng.uniform(0.0, lb_scale, nv)
    alpha = lb + rng.uniform(0.0, 1.0, nv) * (1.0 - lb)
    u = rng.standard_normal(problem.n_udofs) * 0.1
    state = State(u=u, alpha=alpha, alpha_lb=lb, load=0.0)
    state.check_feasible()
    return state


@pytest.fixture(scope="session")
def small_material() -> Material:
    return Material(E=1.0, nu=0.3, Gc=1.0, ell=0.1, k_ell=1e-6)


@pytest.fixture(scope="session")
def tiny_problem(small_material) -> Discretization:
    """4x4-cell unit-square discretization used by derivative checks."""
    mesh = rect_mesh(1.0, 1.0, 0.25)
    return Discretization(mesh, small_material)
