"""P1 assembly of the coupled displacement/damage energy on triangle meshes.

The discrete energy of a state (u, alpha) is

    E(u, alpha) = sum_e A_e * [ 1/2 a(ab_e) (B_e u_e - eps0_e)^T D (B_e u_e - eps0_e)
                                + (Gc/c_w) ( w(ab_e)/ell + ell |G_e alpha_e|^2 ) ]

with one-point (centroid) quadrature: ab_e is the mean of the three nodal
damage values, B_e the constant Voigt strain-displacement matrix, G_e the
constant P1 gradient, and eps0_e an optional inelastic (thermal) strain per
element.  All residuals and Hessian blocks below are exact derivatives of this
discrete functional, so finite-difference consistency holds to round-off.

Voigt convention: (e11, e22, gamma12) with engineering shear gamma12 = 2 e12.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .model import C_W, DamageModel, Material


class EnergyBreakdown(NamedTuple):
    elastic: float
    dissipated: float
    total: float


@dataclass
class State:
    """Solution fields plus the irreversibility floor and the current load."""

    u: np.ndarray
    alpha: np.ndarray
    alpha_lb: np.ndarray
    load: float = 0.0

    @classmethod
    def zeros(cls, mesh: Mesh, alpha_lb: Optional[np.ndarray] = None) -> "State":
        n = mesh.n_vertices
        lb = np.zeros(n) if alpha_lb is None else np.asarray(alpha_lb, dtype=float).copy()
        return cls(u=np.zeros(2 * n), alpha=lb.copy(), alpha_lb=lb, load=0.0)

    def copy(self) -> "State":
        return State(self.u.copy(), self.alpha.copy(), self.alpha_lb.copy(), self.load)

    def check_feasible(self, tol: float = 1e-12) -> None:
        if np.any(self.alpha < self.alpha_lb - tol) or np.any(self.alpha > 1.0 + tol):
            raise ValueError("state violates alpha_lb <= alpha <= 1")


@dataclass
class DirichletBC:
    """Prescribed values on a set of displacement dofs.

    Duplicate dofs are tolerated when their values agree (shared corners) and
    rejected otherwise.
    """

    dofs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dofs = np.asarray(self.dofs, dtype=np.intp)
        values = np.asarray(self.values, dtype=float)
        if dofs.shape != values.shape:
            raise ValueError("dofs and values must have matching shapes")
        order = np.argsort(dofs, kind="stable")
        dofs, values = dofs[order], values[order]
        dup = dofs[1:] == dofs[:-1]
        if np.any(dup):
            bad = dup & (values[1:] != values[:-1])
            if np.any(bad):
                j = dofs[1:][bad][0]
                raise ValueError(f"conflicting Dirichlet values on dof {j}")
            keep = np.concatenate([[True], ~dup])
            dofs, values = dofs[keep], values[keep]
        self.dofs, self.values = dofs, values


def combine_bcs(*bcs: DirichletBC) -> DirichletBC:
    """Merge boundary conditions; conflicting duplicates raise."""
    return DirichletBC(np.concatenate([b.dofs for b in bcs]),
                       np.concatenate([b.values for b in bcs]))


class Discretization:
    """Mesh + material with precomputed element geometry and mutable load data.

    ``bc`` (displacement Dirichlet data) and ``eps0`` (per-element inelastic
    strain in Voigt form) are set per load step by the drivers; all assembly
    routines are pure functions of (state, problem attributes).
    """

    def __init__(self, mesh: Mesh, material: Material, damage: Optional[DamageModel] = None):
        self.mesh = mesh
        self.material = material
        self.damage = damage or DamageModel()
        self.bc: Optional[DirichletBC] = None

        tri = mesh.triangles
        xy = mesh.vertices
        p1, p2, p3 = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
        det = ((p2[:, 0] - p1[:, 0]) * (p3[:, 1] - p1[:, 1])
               - (p2[:, 1] - p1[:, 1]) * (p3[:, 0] - p1[:, 0]))
        if np.any(det <= 0):
            raise ValueError("mesh contains non-CCW or degenerate triangles")
        self.area = 0.5 * det
        self.centroids = (p1 + p2 + p3) / 3.0

        # P1 basis gradients: grad(lambda_m) = (b_m, c_m) / det
        b = np.stack([p2[:, 1] - p3[:, 1], p3[:, 1] - p1[:, 1], p1[:, 1] - p2[:, 1]], axis=1)
        c = np.stack([p3[:, 0] - p2[:, 0], p1[:, 0] - p3[:, 0], p2[:, 0] - p1[:, 0]], axis=1)
        b = b / det[:, None]
        c = c / det[:, None]
        T = tri.shape[0]
        self.G = np.stack([b, c], axis=1)  # (T, 2, 3)

        # Voigt strain-displacement matrix (T, 3, 6)
        B = np.zeros((T, 3, 6))
        B[:, 0, 0::2] = b
        B[:, 1, 1::2] = c
        B[:, 2, 0::2] = c
        B[:, 2, 1::2] = b
        self.B = B

        self.D = material.stiffness_matrix()
        self.BtDB = np.einsum("eki,kl,elj->eij", B, self.D, B)
        self.GtG = np.einsum("eki,ekj->eij", self.G, self.G)

        self.adofs = tri.astype(np.intp)  # (T, 3)
        ud = np.empty((T, 6), dtype=np.intp)
        ud[:, 0::2] = 2 * tri
        ud[:, 1::2] = 2 * tri + 1
        self.udofs = ud

        self.n_vertices = mesh.n_vertices
        self.n_udofs = 2 * mesh.n_vertices
        self.eps0 = np.zeros((T, 3))

    # -- per-element ingredients ------------------------------------------

    def _alpha_bar(self, alpha: np.ndarray) -> np.ndarray:
        return alpha[self.adofs].mean(axis=1)

    def _eps_eff(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("eij,ej->ei", self.B, u[self.udofs]) - self.eps0

    def _scatter(self, dofs: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
        return np.bincount(dofs.ravel(), weights=values.ravel(), minlength=n)


# -- energy and residuals ---------------------------------------------------


def assemble_energy(state: State, problem: Discretization) -> EnergyBreakdown:
    """Elastic / dissipated / total energy of the state."""
    m = problem.material
    ab = problem._alpha_bar(state.alpha)
    a, _, _ = problem.damage.a_eval(ab, m.k_ell)
    w, _, _ = problem.damage.w_eval(ab)
    eps = problem._eps_eff(state.u)
    q = np.einsum("ei,ij,ej->e", eps, problem.D, eps)
    elastic = 0.5 * float(np.dot(problem.area, a * q))
    grad = np.einsum("eij,ej->ei", problem.G, state.alpha[problem.adofs])
    dens = w / m.ell + m.ell * np.einsum("ei,ei->e", grad, grad)
    dissipated = (m.Gc / C_W) * float(np.dot(problem.area, dens))
    return EnergyBreakdown(elastic, dissipated, elastic + dissipated)


def assemble_residual_u(state: State, problem: Discretization,
                        apply_bc: bool = True) -> np.ndarray:
    """Gradient of the energy in u; Dirichlet rows replaced by (u - ubar)."""
    m = problem.material
    ab = problem._alpha_bar(state.alpha)
    a, _, _ = problem.damage.a_eval(ab, m.k_ell)
    eps = problem._eps_eff(state.u)
    sig = np.einsum("ij,ej->ei", problem.D, eps)
    re = (a * problem.area)[:, None] * np.einsum("eik,ei->ek", problem.B, sig)
    r = problem._scatter(problem.udofs, re, problem.n_udofs)
    if apply_bc and problem.bc is not None:
        r[problem.bc.dofs] = state.u[problem.bc.dofs] - problem.bc.values
    return r


def assemble_load_u(state: State, problem: Discretization) -> np.ndarray:
    """Inelastic-strain load vector f with residual_u(u) = Kuu u - f (no BC)."""
    m = problem.material
    ab = problem._alpha_bar(state.alpha)
    a, _, _ = problem.damage.a_eval(ab, m.k_ell)
    sig0 = np.einsum("ij,ej->ei", problem.D, problem.eps0)
    fe = (a * problem.area)[:, None] * np.einsum("eik,ei->ek", problem.B, sig0)
    return problem._scatter(problem.udofs, fe, problem.n_udofs)


def assemble_residual_alpha(state: State, problem: Discretization) -> np.ndarray:
    """Gradient of the energy in alpha (no Dirichlet data on damage)."""
    m = problem.material
    ab = problem._alpha_bar(state.alpha)
    _, ap, _ = problem.damage.a_eval(ab, m.k_ell)
    _, wp, _ = problem.damage.w_eval(ab)
    eps = problem._eps_eff(state.u)
    q = np.einsum("ei,ij,ej->e", eps, problem.D, eps)
    # d(ab)/d(alpha_m) = 1/3 for each of the three nodes
    nodal = (0.5 * ap * q + (m.Gc / C_W) * wp / m.ell) * problem.area / 3.0
    r = problem._scatter(problem.adofs, np.repeat(nodal[:, None], 3, axis=1),
                         problem.n_vertices)
    grad = np.einsum("eij,ej->ei", problem.G, state.alpha[problem.adofs])
    ge = 2.0 * (m.Gc / C_W) * m.ell * problem.area[:, None] * np.einsum(
        "eij,ei->ej", problem.G, grad)
    r += problem._scatter(problem.adofs, ge, problem.n_vertices)
    return r


# -- Hessian blocks ----------------------------------------------------------


def _coo(problem, rows_dofs, cols_dofs, data, shape):
    r = np.repeat(rows_dofs, cols_dofs.shape[1], axis=1).ravel()
    c = np.tile(cols_dofs, (1, rows_dofs.shape[1])).ravel()
    A = sp.coo_matrix((data.ravel(), (r, c)), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def assemble_Kuu(state: State, problem: Discretization, apply_bc: bool = True) -> sp.csr_matrix:
    """Damage-degraded elasticity matrix; Dirichlet rows/cols eliminated."""
    m = problem.material
    ab = problem._alpha_bar(state.alpha)
    a, _, _ = problem.damage.a_eval(ab, m.k_ell)
    data = (a * problem.area)[:, None, None] * problem.BtDB
    K = _coo(problem, problem.udofs, problem.udofs, data,
             (problem.n_udofs, problem.n_udofs))
    if apply_bc and problem.bc is not None:
        K = eliminate_dirichlet(K, problem.bc.dofs)
    return K


def assemble_Kua(state: State, problem: Discretization, apply_bc: bool = True) -> sp.csr_matrix:
    """Mixed block d(residual_u)/d(alpha); Dirichlet rows zeroed."""
    m = problem.material
    ab = problem._alpha_bar(state.alpha)
    _, ap, _ = problem.damage.a_eval(ab, m.k_ell)
    eps = problem._eps_eff(state.u)
    sig = np.einsum("ij,ej->ei", problem.D, eps)
    v = (ap * problem.area / 3.0)[:, None] * np.einsum("eik,ei->ek", problem.B, sig)
    data = np.repeat(v[:, :, None], 3, axis=2)  # identical columns per node
    K = _coo(problem, problem.udofs, problem.adofs, data,
             (problem.n_udofs, problem.n_vertices))
    if apply_bc and problem.bc is not None:
        mask = np.ones(problem.n_udofs)
        mask[problem.bc.dofs] = 0.0
        K = sp.diags(mask) @ K
        K = K.tocsr()
        K.eliminate_zeros()
    return K


def assemble_Kaa(state: State, problem: Discretization) -> sp.csr_matrix:
    """Damage block: strain-energy reaction + (Gc/c_w) ell Laplacian (w'' = 0)."""
    m = problem.material
    ab = problem._alpha_bar(state.alpha)
    _, _, app = problem.damage.a_eval(ab, m.k_ell)
    eps = problem._eps_eff(state.u)
    q = np.einsum("ei,ij,ej->e", eps, problem.D, eps)
    react = (0.5 * app * q * problem.area / 9.0)[:, None, None] * np.ones((1, 3, 3))
    diff = (2.0 * (m.Gc / C_W) * m.ell * problem.area)[:, None, None] * problem.GtG
    return _coo(problem, problem.adofs, problem.adofs, react + diff,
                (problem.n_vertices, problem.n_vertices))


# -- Dirichlet elimination ----------------------------------------------------


def eliminate_dirichlet(K: sp.csr_matrix, dofs: np.ndarray) -> sp.csr_matrix:
    """Zero rows/columns of ``dofs`` and put 1 on their diagonal."""
    n = K.shape[0]
    mask = np.ones(n)
    mask[dofs] = 0.0
    Dm = sp.diags(mask)
    K2 = (Dm @ K @ Dm).tocsr()
    ones = np.zeros(n)
    ones[dofs] = 1.0
    K2 = (K2 + sp.diags(ones)).tocsr()
    K2.eliminate_zeros()
    K2.sort_indices()
    return K2


def apply_dirichlet(K: sp.csr_matrix, rhs: np.ndarray, bc: DirichletBC):
    """Symmetric elimination of a linear system.

    Returns (K', rhs') with K'[j, :] = K'[:, j] = e_j and rhs'[j] = value_j for
    constrained j, and rhs adjusted on free rows so the solution is unchanged.
    """
    n = K.shape[0]
    g = np.zeros(n)
    g[bc.dofs] = bc.values
    mask = np.ones(n)
    mask[bc.dofs] = 0.0
    rhs2 = mask * (rhs - K @ g)
    rhs2[bc.dofs] = bc.values
    return eliminate_dirichlet(K, bc.dofs), rhs2
