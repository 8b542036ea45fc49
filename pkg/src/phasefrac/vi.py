"""Box-constrained nonlinear systems as mixed complementarity problems (MCP).

A solution of the MCP for F with bounds l <= x <= u satisfies, componentwise,
exactly one of

    l_i < x_i < u_i  and  F_i(x) = 0
    x_i = l_i        and  F_i(x) >= 0
    x_i = u_i        and  F_i(x) <= 0

The semismooth residual is built from the Fischer-Burmeister function
``phi(a, b) = sqrt(a^2 + b^2) - a - b`` (zero iff a, b >= 0 and a*b = 0),
composed for two-sided bounds as ``phi(x - l, phi(u - x, -F))``; the squared
norm of the resulting residual is a smooth merit function.

``rsls_solve`` is a reduced-space active-set Newton method: bound-active
components with the right residual sign are frozen, a Newton step is computed
on the inactive block, and a projected line search on the merit accepts the
step, falling back to (projected) steepest descent on the merit when the
Newton direction is unavailable or fails to decrease.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .linalg import (LinearSolveReport, LinearSolverError, direct_factorize,
                     extract_submatrix)

_SQRT2_M1 = 1.0 / np.sqrt(2.0) - 1.0


@dataclass
class MCProblem:
    """Residual/Jacobian callbacks with box bounds (entries may be +-inf)."""

    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], Any]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound shapes differ")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


@dataclass
class ActivePartition:
    lower: np.ndarray
    upper: np.ndarray
    inactive: np.ndarray

    @property
    def active(self) -> np.ndarray:
        return np.sort(np.concatenate([self.lower, self.upper]))


@dataclass
class VIConfig:
    zero_tol: Optional[float] = None  # active-set slack; None -> 1e-10*(1+|x0|_inf)
    abs_tol: float = 1e-8
    max_iterations: int = 100
    ls_backtrack: float = 0.5
    ls_min_step: float = 1e-10
    armijo: float = 1e-4


@dataclass
class ActiveSetReport:
    iterations: int
    converged: bool
    final_residual_norm: float
    residual_history: list = field(default_factory=list)
    total_krylov_iterations: int = 0
    steepest_descent_steps: int = 0
    linear_failures: int = 0


def fb_phi(a, b):
    """Fischer-Burmeister function sqrt(a^2 + b^2) - a - b (vectorized)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.hypot(a, b) - a - b


def _bound_masks(lower: np.ndarray, upper: np.ndarray):
    lo = np.isfinite(lower)
    up = np.isfinite(upper)
    return (~lo & ~up), (lo & ~up), (~lo & up), (lo & up)


def fb_composite(x: np.ndarray, F: np.ndarray, lower: np.ndarray,
                 upper: np.ndarray) -> np.ndarray:
    """Semismooth residual Phi(x); free rows pass F through unchanged."""
    free, lonly, uonly, both = _bound_masks(lower, upper)
    phi = np.empty_like(F)
    phi[free] = F[free]
    if lonly.any():
        phi[lonly] = fb_phi(x[lonly] - lower[lonly], F[lonly])
    if uonly.any():
        phi[uonly] = -fb_phi(upper[uonly] - x[uonly], -F[uonly])
    if both.any():
        inner = fb_phi(upper[both] - x[both], -F[both])
        phi[both] = fb_phi(x[both] - lower[both], inner)
    return phi


def mcp_residual(x: np.ndarray, problem: MCProblem) -> np.ndarray:
    """Phi(x) for a feasible point; infeasible input raises."""
    x = np.asarray(x, dtype=float)
    tol = 1e-12 * (1.0 + float(np.max(np.abs(x))) if x.size else 1.0)
    if np.any(x < problem.lower - tol) or np.any(x > problem.upper + tol):
        raise ValueError("mcp_residual: x violates the bounds")
    return fb_composite(x, problem.residual(x), problem.lower, problem.upper)


def classify_active(x: np.ndarray, F: np.ndarray, lower: np.ndarray,
                    upper: np.ndarray, zeta: float) -> ActivePartition:
    """Split indices into bound-active (frozen) and inactive (Newton) sets.

    Lower-active: x within zeta of a finite lower bound with F > 0;
    upper-active: within zeta of a finite upper bound with F < 0.
    """
    lo_fin = np.isfinite(lower)
    up_fin = np.isfinite(upper)
    lower_active = lo_fin & (x - lower <= zeta) & (F > 0.0)
    upper_active = up_fin & (upper - x <= zeta) & (F < 0.0) & ~lower_active
    inactive = ~(lower_active | upper_active)
    return ActivePartition(np.flatnonzero(lower_active),
                           np.flatnonzero(upper_active),
                           np.flatnonzero(inactive))


def _fb_partials(a, b):
    """(d/da, d/db) of fb_phi with the (1/sqrt2 - 1, .) subgradient at 0."""
    rho = np.hypot(a, b)
    safe = rho > 0.0
    pa = np.where(safe, a / np.where(safe, rho, 1.0) - 1.0, _SQRT2_M1)
    pb = np.where(safe, b / np.where(safe, rho, 1.0) - 1.0, _SQRT2_M1)
    return pa, pb


def _merit_gradient(x, F, phi, J, lower, upper) -> np.ndarray:
    """Gradient of ||Phi||^2: 2 J_Phi^T Phi with J_Phi = diag(p) + diag(q) J."""
    free, lonly, uonly, both = _bound_masks(lower, upper)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    q[free] = 1.0
    if lonly.any():
        pa, pb = _fb_partials(x[lonly] - lower[lonly], F[lonly])
        p[lonly], q[lonly] = pa, pb
    if uonly.any():
        pa, pb = _fb_partials(upper[uonly] - x[uonly], -F[uonly])
        p[uonly], q[uonly] = pa, pb
    if both.any():
        s = upper[both] - x[both]
        inner = fb_phi(s, -F[both])
        pa_o, pb_o = _fb_partials(x[both] - lower[both], inner)
        pa_i, pb_i = _fb_partials(s, -F[both])
        p[both] = pa_o - pb_o * pa_i
        q[both] = -pb_o * pb_i
    if hasattr(J, "matvec_transpose"):
        Jt_qphi = J.matvec_transpose(q * phi)
    elif hasattr(J, "matvec"):  # symmetric block operators
        Jt_qphi = J.matvec(q * phi)
    else:
        Jt_qphi = J.T @ (q * phi)
    return 2.0 * (p * phi + Jt_qphi)


def reduced_direct_solver(J, inactive: np.ndarray, rhs: np.ndarray):
    """Default inner solver: LU on the inactive submatrix of a CSR Jacobian."""
    sub = extract_submatrix(J, inactive, inactive)
    return direct_factorize(sub).solve(rhs), None


def rsls_solve(problem: MCProblem, x0: np.ndarray, config: Optional[VIConfig] = None,
               linear_solver=None):
    """Reduced-space active-set semismooth Newton solve of the MCP.

    Returns (x, ActiveSetReport).  Every iterate is exactly feasible (trial
    points are clamped to the box); the merit ||Phi||^2 never increases across
    accepted iterations.
    """
    config = config or VIConfig()
    linear_solver = linear_solver or reduced_direct_solver
    x = np.clip(np.asarray(x0, dtype=float), problem.lower, problem.upper)
    zeta = config.zero_tol
    if zeta is None:
        scale = float(np.max(np.abs(x))) if x.size else 0.0
        zeta = 1e-10 * (1.0 + scale)

    report = ActiveSetReport(0, False, np.inf)
    F = problem.residual(x)
    phi = fb_composite(x, F, problem.lower, problem.upper)
    merit = float(phi @ phi)
    report.residual_history.append(np.sqrt(merit))

    def line_search(d, bound):
        """Backtrack on projected trials; bound(mu) is the acceptance target."""
        mu = 1.0
        while mu >= config.ls_min_step:
            trial = np.clip(x + mu * d, problem.lower, problem.upper)
            F_t = problem.residual(trial)
            phi_t = fb_composite(trial, F_t, problem.lower, problem.upper)
            m_t = float(phi_t @ phi_t)
            if m_t <= bound(mu):
                return trial, F_t, phi_t, m_t
            mu *= config.ls_backtrack
        return None

    for it in range(1, config.max_iterations + 1):
        if np.sqrt(merit) <= config.abs_tol:
            report.converged = True
            break
        report.iterations = it

        part = classify_active(x, F, problem.lower, problem.upper, zeta)
        J = problem.jacobian(x)
        accepted = None

        if part.inactive.size:
            d = np.zeros_like(x)
            try:
                dN, lin_rep = linear_solver(J, part.inactive, F[part.inactive])
                d[part.inactive] = -dN
                if isinstance(lin_rep, LinearSolveReport):
                    report.total_krylov_iterations += lin_rep.iterations
                accepted = line_search(
                    d, lambda mu: (1.0 - 2.0 * config.armijo * mu) * merit)
            except (LinearSolverError, np.linalg.LinAlgError):
                report.linear_failures += 1

        if accepted is None:
            g = _merit_gradient(x, F, phi, J, problem.lower, problem.upper)
            gnorm = float(np.linalg.norm(g))
            if gnorm > 0.0:
                scale = 1.0 / max(1.0, gnorm)
                accepted = line_search(
                    -scale * g,
                    lambda mu: merit - config.armijo * mu * scale * gnorm * gnorm)
                report.steepest_descent_steps += 1
        if accepted is None:
            break  # stagnation: no descent along Newton or gradient direction

        x, F, phi, merit = accepted
        report.residual_history.append(np.sqrt(merit))
    else:
        # loop exhausted without hitting the tolerance
        pass

    report.final_residual_norm = float(np.sqrt(merit))
    report.converged = report.final_residual_norm <= config.abs_tol
    return x, report
