"""Nonlinear solvers for one quasi-static load step of the fracture model.

Three entry points, all driving the same first-order optimality system
(displacement residual with Dirichlet rows zeroed, damage residual composed
through the Fischer-Burmeister function against the bounds
``alpha_lb <= alpha <= 1``):

* ``am_solve`` -- alternate minimization: exact linear solve in u at fixed
  alpha, then a bound-constrained damage solve at fixed u, with optional
  over-relaxation ``omega`` of both half-step increments.  Over-relaxed
  damage updates that leave the box are backtracked toward the unrelaxed
  update (midpoint rule) until feasible.  With ``omega = 1`` the total energy
  is nonincreasing across iterations.
* ``coupled_newton_solve`` -- semismooth active-set Newton on the stacked
  (u, alpha) system, with either a direct solve of the inactive block or
  MINRES preconditioned by a multiplicative field split.
* ``oram_n_solve`` -- outer cycles that run alternate minimization to a loose
  relative tolerance and then hand over to the coupled Newton solver; a
  failed Newton phase keeps its last (merit-nonincreasing) iterate and
  returns to alternate minimization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .fem import (Discretization, EnergyBreakdown, State, apply_dirichlet,
                  assemble_energy, assemble_Kaa, assemble_Kua, assemble_Kuu,
                  assemble_load_u, assemble_residual_alpha,
                  assemble_residual_u)
from .linalg import (BlockJacobian, FieldSplitPreconditioner,
                     LinearSolverError, cg_solve, direct_factorize,
                     extract_submatrix, inner_cg, inner_direct, minres_solve,
                     stationary_precond)
from .vi import (ActiveSetReport, MCProblem, VIConfig, classify_active,
                 fb_composite, rsls_solve)

_METHODS = ("am", "oram_newton", "newton_only")
_ELASTIC = ("direct", "cg")
_COUPLED = ("direct", "fieldsplit")
_INNER = ("direct", "cg")


@dataclass
class SolverConfig:
    """Knobs for the load-step solvers; invalid choices raise at construction."""

    method: str = "am"               # "am" (covers over-relaxation) or "oram_newton"
    omega: float = 1.0               # relaxation weight, required to lie in (0, 2)
    outer_atol: float = 1e-7         # absolute l2 tolerance on the optimality residual
    am_rtol: float = 1e-1            # relative target of the AM phase inside oram_newton
    max_am_iterations: int = 1000
    max_newton_iterations: int = 30
    max_outer_cycles: int = 20
    elastic_solver: str = "direct"   # displacement half-step: "direct" or "cg"
    elastic_rtol: float = 1e-10
    elastic_precond: str = "ssor"
    coupled_solver: str = "fieldsplit"   # Newton inactive block: "direct" or "fieldsplit"
    fieldsplit_inner: str = "direct"     # block inverses: "direct" or "cg"
    fieldsplit_cg_budget: int = 5
    fieldsplit_rtol: float = 1e-6
    damage_atol_factor: float = 0.1  # damage subproblem tol = factor * outer_atol
    max_vi_iterations: int = 200
    newton_dalpha: float = 1e-6      # max estimated remaining damage travel at Newton handoff
    log_callback: Optional[Callable[[dict], None]] = None

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"omega must lie strictly inside (0, 2), got {self.omega}")
        if self.method not in _METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {_METHODS}")
        if self.elastic_solver not in _ELASTIC:
            raise ValueError(f"unknown elastic_solver {self.elastic_solver!r}")
        if self.coupled_solver not in _COUPLED:
            raise ValueError(f"unknown coupled_solver {self.coupled_solver!r}")
        if self.fieldsplit_inner not in _INNER:
            raise ValueError(f"unknown fieldsplit_inner {self.fieldsplit_inner!r}")
        if self.outer_atol <= 0.0 or self.am_rtol <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass
class NonlinearReport:
    """Outcome and cost accounting of one load-step solve."""

    converged: bool = False
    final_residual_norm: float = np.inf
    am_iterations: int = 0
    newton_iterations: int = 0
    newton_attempts: int = 0
    total_krylov_iterations: int = 0
    omega_bar_min: float = 1.0
    energy_history: list = field(default_factory=list)      # EnergyBreakdown per iterate
    residual_history: list = field(default_factory=list)    # optimality norm per iterate
    newton_residual_histories: list = field(default_factory=list)


# -- first-order optimality ----------------------------------------------------


def first_order_residual(state: State, problem: Discretization) -> np.ndarray:
    """Stacked optimality residual: plain u-rows (Dirichlet rows zeroed) and
    the Fischer-Burmeister composition of the damage rows with the box
    ``alpha_lb <= alpha <= 1``."""
    ru = assemble_residual_u(state, problem, apply_bc=False)
    if problem.bc is not None:
        ru[problem.bc.dofs] = 0.0
    ra = assemble_residual_alpha(state, problem)
    phi_a = fb_composite(state.alpha, ra, state.alpha_lb,
                         np.ones_like(state.alpha))
    return np.concatenate([ru, phi_a])


def residual_norm(state: State, problem: Discretization) -> float:
    return float(np.linalg.norm(first_order_residual(state, problem)))


def _snap_bc(state: State, problem: Discretization) -> None:
    if problem.bc is not None:
        state.u[problem.bc.dofs] = problem.bc.values


# -- half-steps -----------------------------------------------------------------


def elastic_step(state: State, problem: Discretization, config: SolverConfig):
    """Minimize the energy in u at fixed alpha.  Returns (u, krylov_iterations)."""
    K = assemble_Kuu(state, problem, apply_bc=False)
    f = assemble_load_u(state, problem)
    if problem.bc is not None:
        K, f = apply_dirichlet(K, f, problem.bc)
    if config.elastic_solver == "direct":
        return direct_factorize(K).solve(f), 0
    precond = stationary_precond(K, config.elastic_precond)
    u, rep = cg_solve(K, f, precond=precond, rtol=config.elastic_rtol)
    if not rep.converged:
        raise LinearSolverError(
            f"elastic CG stalled at residual {rep.final_residual_norm:.3e}")
    return u, rep.iterations


def damage_step(state: State, problem: Discretization, config: SolverConfig):
    """Minimize the energy in alpha at fixed u, subject to the box constraints.

    The damage residual is affine in alpha at fixed u, so the subproblem is a
    convex bound-constrained quadratic solved by the active-set method.
    Returns (alpha, ActiveSetReport).
    """
    Kaa = assemble_Kaa(state, problem)
    c = assemble_residual_alpha(state, problem) - Kaa @ state.alpha
    mcp = MCProblem(residual=lambda a: Kaa @ a + c,
                    jacobian=lambda a: Kaa,
                    lower=state.alpha_lb,
                    upper=np.ones_like(state.alpha))
    vic = VIConfig(abs_tol=config.damage_atol_factor * config.outer_atol,
                   max_iterations=config.max_vi_iterations)
    return rsls_solve(mcp, state.alpha, vic)


# -- alternate minimization ------------------------------------------------------


def am_solve(state: State, problem: Discretization, config: SolverConfig,
             rtol: Optional[float] = None, cycle: int = 0) -> NonlinearReport:
    """Alternate minimization with over-relaxation; mutates ``state`` in place.

    Stops when the optimality norm drops below ``outer_atol``.  When ``rtol``
    is given (the hand-off phase of the composite method) it may stop earlier,
    once the norm falls below ``rtol`` times its entry value *and* the damage
    field has settled: the remaining travel of the damage iterates, estimated
    from the last two sweep increments assuming linear contraction as
    ``d_k^2 / (d_{k-1} - d_k)``, must not exceed ``newton_dalpha``.  While a
    crack front is still advancing the sweeps contract slowly and the estimate
    stays large, preventing a premature hand-off after which Newton would
    converge to a different stationary point than the one alternate
    minimization is descending to.  Always performs at least one iteration.
    """
    _snap_bc(state, problem)
    phi0 = residual_norm(state, problem)
    target = config.outer_atol if rtol is None else max(rtol * phi0, config.outer_atol)

    report = NonlinearReport(omega_bar_min=config.omega)
    report.energy_history.append(assemble_energy(state, problem))
    report.residual_history.append(phi0)

    d_prev = None
    while report.am_iterations < config.max_am_iterations:
        report.am_iterations += 1

        u_prev = state.u.copy()
        u_star, kit = elastic_step(state, problem, config)
        report.total_krylov_iterations += kit
        state.u = u_prev + config.omega * (u_star - u_prev)
        _snap_bc(state, problem)

        a_prev = state.alpha.copy()
        a_star, vrep = damage_step(state, problem, config)
        report.total_krylov_iterations += vrep.total_krylov_iterations
        omega_bar = config.omega
        cand = a_star if omega_bar == 1.0 else a_prev + omega_bar * (a_star - a_prev)
        halvings = 0
        while np.any(cand < state.alpha_lb) or np.any(cand > 1.0):
            # infeasible over-relaxed update: move omega_bar halfway back to 1,
            # flooring at the always-feasible unrelaxed update
            omega_bar = 0.5 * (1.0 + omega_bar)
            halvings += 1
            if halvings >= 60 or omega_bar == 1.0:
                omega_bar, cand = 1.0, a_star
                break
            cand = a_prev + omega_bar * (a_star - a_prev)
        state.alpha = np.clip(cand, state.alpha_lb, 1.0)
        report.omega_bar_min = min(report.omega_bar_min, omega_bar)
        d_alpha = float(np.max(np.abs(state.alpha - a_prev), initial=0.0))

        res = residual_norm(state, problem)
        energy = assemble_energy(state, problem)
        report.energy_history.append(energy)
        report.residual_history.append(res)
        if config.log_callback is not None:
            config.log_callback({
                "phase": "am", "cycle": cycle, "iteration": report.am_iterations,
                "residual": res, "omega_bar": omega_bar,
                "elastic": energy.elastic, "dissipated": energy.dissipated,
                "total": energy.total,
            })
        if rtol is None or d_alpha == 0.0:
            settled = True
        elif d_prev is not None and d_alpha < d_prev:
            settled = d_alpha * d_alpha / (d_prev - d_alpha) <= config.newton_dalpha
        else:
            settled = False
        d_prev = d_alpha
        if res <= config.outer_atol or (res <= target and settled):
            report.converged = True
            break

    report.final_residual_norm = report.residual_history[-1]
    return report


# -- coupled Newton ----------------------------------------------------------------


def _make_coupled_linear_solver(config: SolverConfig):
    """Inner solver for the inactive block of the stacked Newton system."""

    def solve(J: BlockJacobian, inactive: np.ndarray, rhs: np.ndarray):
        if config.coupled_solver == "direct":
            sub = extract_submatrix(J.to_csr(), inactive, inactive)
            return direct_factorize(sub).solve(rhs), None
        iu = inactive[inactive < J.nu]
        ia = inactive[inactive >= J.nu] - J.nu
        red = BlockJacobian(extract_submatrix(J.A, iu, iu),
                            extract_submatrix(J.B, iu, ia),
                            extract_submatrix(J.C, ia, ia))
        if config.fieldsplit_inner == "direct":
            inner_a, inner_c = inner_direct(red.A), inner_direct(red.C)
        else:
            inner_a = inner_cg(red.A, budget=config.fieldsplit_cg_budget)
            inner_c = inner_cg(red.C, budget=config.fieldsplit_cg_budget)
        precond = FieldSplitPreconditioner(red, inner_a, inner_c)
        d, rep = minres_solve(red, rhs, precond=precond, rtol=config.fieldsplit_rtol)
        if not rep.converged:
            raise LinearSolverError(
                f"field-split MINRES stalled at residual {rep.final_residual_norm:.3e}")
        return d, rep

    return solve


def coupled_mcp(state: State, problem: Discretization) -> MCProblem:
    """The stacked (u, alpha) system as a mixed complementarity problem.

    Displacement components are unbounded; Dirichlet rows carry the residual
    ``u - ubar`` and an identity Jacobian row, which pins them without bounds.
    """
    nu = problem.n_udofs
    work = state.copy()

    def unpack(x: np.ndarray) -> None:
        work.u = x[:nu]
        work.alpha = x[nu:]

    def residual(x: np.ndarray) -> np.ndarray:
        unpack(x)
        return np.concatenate([assemble_residual_u(work, problem, apply_bc=True),
                               assemble_residual_alpha(work, problem)])

    def jacobian(x: np.ndarray) -> BlockJacobian:
        unpack(x)
        return BlockJacobian(assemble_Kuu(work, problem, apply_bc=True),
                             assemble_Kua(work, problem, apply_bc=True),
                             assemble_Kaa(work, problem))

    lower = np.concatenate([np.full(nu, -np.inf), state.alpha_lb])
    upper = np.concatenate([np.full(nu, np.inf), np.ones(problem.n_vertices)])
    return MCProblem(residual, jacobian, lower, upper)


def coupled_newton_solve(state: State, problem: Discretization,
                         config: SolverConfig, cycle: int = 0):
    """Active-set Newton on the stacked system from the current state.

    Does not mutate ``state``; returns (new_state, ActiveSetReport).  The
    returned state is the last merit-nonincreasing iterate even on failure.

    The boundary rows of ``state.u`` should already satisfy the Dirichlet
    data (run an elastic presolve or an alternate-minimization sweep first):
    the stacked Jacobian eliminates boundary columns symmetrically, so
    directions computed from boundary-inconsistent states lack the
    boundary-to-interior coupling.
    """
    mcp = coupled_mcp(state, problem)
    x0 = np.concatenate([state.u, state.alpha])
    vic = VIConfig(abs_tol=config.outer_atol,
                   max_iterations=config.max_newton_iterations)
    x, rep = rsls_solve(mcp, x0, vic, linear_solver=_make_coupled_linear_solver(config))
    out = state.copy()
    out.u = x[:problem.n_udofs]
    out.alpha = x[problem.n_udofs:]
    if config.log_callback is not None:
        for k, r in enumerate(rep.residual_history):
            config.log_callback({"phase": "newton", "cycle": cycle, "iteration": k,
                                 "residual": r, "omega_bar": np.nan,
                                 "elastic": np.nan, "dissipated": np.nan,
                                 "total": np.nan})
    return out, rep


def oram_n_solve(state: State, problem: Discretization,
                 config: SolverConfig) -> NonlinearReport:
    """Over-relaxed alternate minimization composed with coupled Newton.

    Each outer cycle measures the optimality norm, runs alternate
    minimization until it falls by ``am_rtol`` with the damage field settled
    (see :func:`am_solve`), and then attempts the Newton solve.  The Newton
    result is accepted only if it converged without raising the total energy
    above the hand-off value: near crack-advance bifurcations the semismooth
    Newton method could otherwise hop to a stationary point on an
    energetically worse branch than the one alternate minimization descends
    to.  A rejected or unconverged Newton phase never loses the cycle's
    progress — the next cycle resumes alternate minimization from the
    hand-off point with a tighter target — so the accepted-state energy never
    exceeds the pure alternate-minimization trajectory.
    """
    report = NonlinearReport(omega_bar_min=config.omega)
    _snap_bc(state, problem)

    for cycle in range(config.max_outer_cycles):
        phi0 = residual_norm(state, problem)
        if phi0 <= config.outer_atol:
            report.converged = True
            break

        am_rep = am_solve(state, problem, config, rtol=config.am_rtol, cycle=cycle)
        report.am_iterations += am_rep.am_iterations
        report.total_krylov_iterations += am_rep.total_krylov_iterations
        report.omega_bar_min = min(report.omega_bar_min, am_rep.omega_bar_min)
        start = 1 if report.energy_history else 0
        report.energy_history.extend(am_rep.energy_history[start:])
        report.residual_history.extend(am_rep.residual_history[start:])
        if am_rep.final_residual_norm <= config.outer_atol:
            report.converged = True
            break

        e_handoff = am_rep.energy_history[-1].total
        newt_state, nrep = coupled_newton_solve(state, problem, config, cycle=cycle)
        report.newton_attempts += 1
        report.newton_iterations += nrep.iterations
        report.total_krylov_iterations += nrep.total_krylov_iterations
        report.newton_residual_histories.append(list(nrep.residual_history))
        e_newton = assemble_energy(newt_state, problem)

        slack = 1e-12 * (1.0 + abs(e_handoff))
        if nrep.converged and e_newton.total <= e_handoff + slack:
            state.u, state.alpha = newt_state.u, newt_state.alpha
            report.energy_history.append(e_newton)
            report.residual_history.append(nrep.final_residual_norm)
            report.converged = True
            break

    report.final_residual_norm = residual_norm(state, problem)
    report.converged = report.final_residual_norm <= config.outer_atol
    return report


def solve_load_step(state: State, problem: Discretization,
                    config: SolverConfig) -> NonlinearReport:
    """Dispatch one load step to the configured method; mutates ``state``."""
    if config.method == "oram_newton":
        return oram_n_solve(state, problem, config)
    if config.method == "newton_only":
        # Lift the new boundary data onto the iterate with one linear elastic
        # presolve at the current damage.  The boundary rows must be exactly
        # satisfied before the coupled Newton solve: the stacked Jacobian
        # eliminates boundary columns symmetrically (to stay symmetric for
        # MINRES), so directions computed from boundary-inconsistent states
        # drop the boundary-to-interior coupling and wander; snapping the raw
        # boundary values instead creates a strain spike whose damage driving
        # force strands the merit line search.
        state.u, presolve_kit = elastic_step(state, problem, config)
        new_state, nrep = coupled_newton_solve(state, problem, config)
        state.u, state.alpha = new_state.u, new_state.alpha
        return NonlinearReport(
            converged=nrep.converged,
            final_residual_norm=nrep.final_residual_norm,
            newton_iterations=nrep.iterations,
            newton_attempts=1,
            total_krylov_iterations=nrep.total_krylov_iterations + presolve_kit,
            omega_bar_min=1.0,
            energy_history=[assemble_energy(state, problem)],
            residual_history=list(nrep.residual_history),
            newton_residual_histories=[list(nrep.residual_history)])
    return am_solve(state, problem, config)


# -- reduced block system at a solved state ----------------------------------------


def inactive_block_jacobian(state: State, problem: Discretization,
                            zeta: Optional[float] = None):
    """Symmetric block Jacobian restricted to the inactive set at ``state``.

    Returns (BlockJacobian, inactive_u_indices, inactive_alpha_indices); used
    to study Krylov solvers on the linear systems the coupled Newton method
    actually faces.
    """
    nu = problem.n_udofs
    ru = assemble_residual_u(state, problem, apply_bc=True)
    ra = assemble_residual_alpha(state, problem)
    F = np.concatenate([ru, ra])
    x = np.concatenate([state.u, state.alpha])
    lower = np.concatenate([np.full(nu, -np.inf), state.alpha_lb])
    upper = np.concatenate([np.full(nu, np.inf), np.ones(problem.n_vertices)])
    if zeta is None:
        zeta = 1e-10 * (1.0 + float(np.max(np.abs(x))))
    part = classify_active(x, F, lower, upper, zeta)
    iu = part.inactive[part.inactive < nu]
    ia = part.inactive[part.inactive >= nu] - nu
    A = assemble_Kuu(state, problem, apply_bc=True)
    B = assemble_Kua(state, problem, apply_bc=True)
    C = assemble_Kaa(state, problem)
    red = BlockJacobian(extract_submatrix(A, iu, iu),
                        extract_submatrix(B, iu, ia),
                        extract_submatrix(C, ia, ia))
    return red, iu, ia
