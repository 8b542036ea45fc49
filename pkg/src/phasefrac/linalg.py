"""Sparse linear algebra kernels: CG, MINRES, direct solves, block preconditioner.

Matrices are scipy CSR (compressed-row storage with sorted, duplicate-free
indices).  Krylov solvers are written out longhand because their iteration
counts and residual histories are reported quantities; direct factorization
delegates to SuperLU.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class LinearSolverError(Exception):
    """Base class for linear-solver failures."""


class BreakdownError(LinearSolverError):
    """Krylov recurrence breakdown (indefinite operator or preconditioner)."""


class SingularOperatorError(LinearSolverError):
    """Exact zero pivot during factorization."""

    def __init__(self, message: str, pivot: int = -1):
        super().__init__(message)
        self.pivot = pivot


class InnerSolverError(LinearSolverError):
    """Failure of an inner field-split solve, carrying the block identity."""

    def __init__(self, block: str, cause: Exception):
        super().__init__(f"inner solve on block {block!r} failed: {cause}")
        self.block = block
        self.cause = cause


@dataclass
class LinearSolveReport:
    iterations: int
    final_residual_norm: float
    converged: bool


@dataclass
class BlockJacobian:
    """Symmetric 2x2 block matrix [[A, B], [B^T, C]]."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix

    @property
    def nu(self) -> int:
        return self.A.shape[0]

    @property
    def na(self) -> int:
        return self.C.shape[0]

    @property
    def shape(self):
        n = self.nu + self.na
        return (n, n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        xu, xa = x[: self.nu], x[self.nu:]
        return np.concatenate([self.A @ xu + self.B @ xa,
                               self.B.T @ xu + self.C @ xa])

    def to_csr(self) -> sp.csr_matrix:
        return sp.bmat([[self.A, self.B], [self.B.T, self.C]], format="csr")


def _as_matvec(A) -> tuple[Callable[[np.ndarray], np.ndarray], int]:
    if isinstance(A, BlockJacobian):
        return A.matvec, A.shape[0]
    if sp.issparse(A):
        return (lambda x: A @ x), A.shape[0]
    if hasattr(A, "matvec"):
        return A.matvec, A.shape[0]
    if isinstance(A, np.ndarray):
        return (lambda x: A @ x), A.shape[0]
    raise TypeError(f"unsupported operator type {type(A)!r}")


def _apply_precond(M, r: np.ndarray) -> np.ndarray:
    if M is None:
        return r
    if hasattr(M, "matvec"):
        return M.matvec(r)
    return M(r)


# -- Krylov solvers -----------------------------------------------------------


def cg_solve(A, b: np.ndarray, precond=None, rtol: float = 1e-10,
             atol: float = 0.0, maxit: Optional[int] = None,
             callback: Optional[Callable[[np.ndarray], None]] = None):
    """Preconditioned conjugate gradients for SPD systems, x0 = 0.

    Convergence is tested on the true residual 2-norm against
    max(rtol*||b||, atol).  Detected indefiniteness (p^T A p <= 0 or
    z^T r <= 0) raises BreakdownError naming the offending step.
    """
    matvec, n = _as_matvec(A)
    maxit = maxit if maxit is not None else 10 * n
    bnorm = float(np.linalg.norm(b))
    target = max(rtol * bnorm, atol)
    x = np.zeros(n)
    if bnorm == 0.0:
        return x, LinearSolveReport(0, 0.0, True)
    r = b.copy()
    z = _apply_precond(precond, r)
    rz = float(r @ z)
    if rz <= 0.0:
        raise BreakdownError(f"cg: preconditioner not SPD at iteration 0 (r'z={rz:.3e})")
    p = z.copy()
    rnorm = bnorm
    it = 0
    while it < maxit and rnorm > target:
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise BreakdownError(f"cg: p'Ap = {pAp:.3e} <= 0 at iteration {it + 1} "
                                 "(operator not positive definite)")
        gamma = rz / pAp
        x += gamma * p
        r -= gamma * Ap
        it += 1
        rnorm = float(np.linalg.norm(r))
        if callback is not None:
            callback(x.copy())
        if rnorm <= target:
            break
        z = _apply_precond(precond, r)
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            raise BreakdownError(f"cg: preconditioner not SPD at iteration {it} "
                                 f"(r'z={rz_new:.3e})")
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, LinearSolveReport(it, rnorm, rnorm <= target)


def minres_solve(A, b: np.ndarray, precond=None, rtol: float = 1e-8,
                 atol: float = 0.0, maxit: Optional[int] = None):
    """MINRES for symmetric (possibly indefinite) systems, x0 = 0.

    ``precond`` must be symmetric positive definite; convergence is tested on
    the preconditioned residual norm, which the recurrence decreases
    monotonically.  Accepts CSR matrices, BlockJacobian, or matvec objects.
    """
    matvec, n = _as_matvec(A)
    maxit = maxit if maxit is not None else 10 * n
    x = np.zeros(n)
    r1 = b.copy()
    y = _apply_precond(precond, r1)
    beta1 = float(r1 @ y)
    if beta1 < 0.0:
        raise BreakdownError(f"minres: preconditioner not SPD (r'M^-1 r = {beta1:.3e})")
    beta1 = np.sqrt(beta1)
    if beta1 == 0.0:
        return x, LinearSolveReport(0, 0.0, True)
    target = max(rtol * beta1, atol)

    oldb = 0.0
    beta = beta1
    dbar = epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1
    it = 0
    while it < maxit and phibar > target:
        it += 1
        s = 1.0 / beta
        v = s * y
        y = matvec(v)
        if it >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = _apply_precond(precond, r2)
        oldb = beta
        beta = float(r2 @ y)
        if beta < 0.0:
            raise BreakdownError(f"minres: preconditioner not SPD at iteration {it} "
                                 f"(r'M^-1 r = {beta:.3e})")
        beta = np.sqrt(beta)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
    return x, LinearSolveReport(it, float(phibar), phibar <= target)


# -- direct solves ------------------------------------------------------------


class DirectFactorization:
    """LU factorization handle with a ``solve(b)`` method."""

    def __init__(self, lu):
        self._lu = lu

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self._lu.solve(np.asarray(b, dtype=float))

    __call__ = solve


def _find_zero_pivot(A) -> int:
    """Best-effort pivot index of a singular matrix (dense LU for small n)."""
    n = A.shape[0]
    if n > 2000:
        return -1
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    _, _, U = scipy.linalg.lu(dense)
    diag = np.abs(np.diag(U))
    zero = np.flatnonzero(diag <= diag.max() * np.finfo(float).eps * n if diag.max() > 0
                          else diag <= 0)
    return int(zero[0]) if zero.size else -1


def direct_factorize(A) -> DirectFactorization:
    """Sparse LU with partial pivoting; exact zero pivot raises."""
    A_csc = sp.csc_matrix(A)
    if A_csc.shape[0] != A_csc.shape[1]:
        raise ValueError(f"direct_factorize needs a square matrix, got {A_csc.shape}")
    try:
        lu = spla.splu(A_csc)
    except RuntimeError as exc:
        pivot = _find_zero_pivot(A_csc)
        raise SingularOperatorError(
            f"singular matrix in LU factorization (zero pivot at index {pivot}): {exc}",
            pivot=pivot) from exc
    return DirectFactorization(lu)


def direct_solve(factorization: DirectFactorization, b: np.ndarray) -> np.ndarray:
    return factorization.solve(b)


# -- submatrix extraction ------------------------------------------------------


def _check_index_set(idx: np.ndarray, limit: int, name: str) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size:
        if idx.min() < 0 or idx.max() >= limit:
            raise IndexError(f"{name} index out of range [0, {limit})")
        if np.any(np.diff(idx) <= 0):
            raise ValueError(f"{name} indices must be strictly increasing")
    return idx


def extract_submatrix(A: sp.csr_matrix, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    """CSR submatrix A[rows, cols] for sorted, duplicate-free index sets."""
    rows = _check_index_set(rows, A.shape[0], "row")
    cols = _check_index_set(cols, A.shape[1], "col")
    sub = A[rows][:, cols].tocsr()
    sub.sort_indices()
    return sub


# -- stationary preconditioners -------------------------------------------------


class JacobiPreconditioner:
    """z = r / diag(A)."""

    def __init__(self, A):
        d = np.asarray(A.diagonal(), dtype=float)
        if np.any(d <= 0):
            raise ValueError("jacobi preconditioner needs a positive diagonal")
        self._dinv = 1.0 / d
        self.shape = A.shape

    def matvec(self, r: np.ndarray) -> np.ndarray:
        return self._dinv * r


class SSORPreconditioner:
    """Symmetric SOR: M = 1/(2-w) (D/w + L) (D/w)^-1 (D/w + L^T)."""

    def __init__(self, A, omega: float = 1.0):
        if not 0.0 < omega < 2.0:
            raise ValueError(f"ssor relaxation must lie in (0, 2), got {omega}")
        A = sp.csr_matrix(A)
        d = np.asarray(A.diagonal(), dtype=float)
        if np.any(d == 0):
            raise ValueError("ssor preconditioner needs a nonzero diagonal")
        self._domega = d / omega
        self._lower = (sp.tril(A, -1) + sp.diags(self._domega)).tocsr()
        self._upper = (sp.triu(A, 1) + sp.diags(self._domega)).tocsr()
        self._scale = 2.0 - omega
        self.shape = A.shape

    def matvec(self, r: np.ndarray) -> np.ndarray:
        t = spla.spsolve_triangular(self._lower, r, lower=True)
        t = self._domega * t
        z = spla.spsolve_triangular(self._upper, t, lower=False)
        return self._scale * z


class ChebyshevPreconditioner:
    """Fixed-degree Chebyshev polynomial in the Jacobi-scaled operator.

    A linear SPD operator approximating A^-1 on the interval
    [lambda_max/30, 1.1 lambda_max], with lambda_max of D^-1 A estimated by
    deterministic power iteration at construction.
    """

    def __init__(self, A, degree: int = 3, power_iterations: int = 30):
        if degree < 1:
            raise ValueError("chebyshev degree must be >= 1")
        self._A = sp.csr_matrix(A)
        d = np.asarray(A.diagonal(), dtype=float)
        if np.any(d <= 0):
            raise ValueError("chebyshev preconditioner needs a positive diagonal")
        self._dinv = 1.0 / d
        n = A.shape[0]
        v = 1.0 + np.arange(n) / max(n - 1, 1)  # deterministic, not A-orthogonal
        v /= np.linalg.norm(v)
        lam = 1.0
        for _ in range(power_iterations):
            w = self._dinv * (self._A @ v)
            lam = np.linalg.norm(w)
            if lam == 0.0:
                raise ValueError("chebyshev: operator appears to be zero")
            v = w / lam
        hi = 1.1 * lam
        lo = hi / 30.0
        self._theta = 0.5 * (hi + lo)
        self._delta = 0.5 * (hi - lo)
        self._degree = degree
        self.shape = A.shape

    def matvec(self, r: np.ndarray) -> np.ndarray:
        # Chebyshev acceleration of the Jacobi splitting, x0 = 0
        theta, delta = self._theta, self._delta
        sigma1 = theta / delta
        rho = 1.0 / sigma1
        res = self._dinv * r
        d = res / theta
        x = d.copy()
        for _ in range(self._degree - 1):
            res = res - self._dinv * (self._A @ d)
            rho_new = 1.0 / (2.0 * sigma1 - rho)
            d = rho_new * rho * d + (2.0 * rho_new / delta) * res
            rho = rho_new
            x = x + d
        return x


_STATIONARY = {"jacobi": JacobiPreconditioner, "ssor": SSORPreconditioner,
               "chebyshev": ChebyshevPreconditioner}


def stationary_precond(A, kind: str, **kwargs):
    """Build a Jacobi / SSOR / Chebyshev preconditioner for a CSR matrix."""
    try:
        cls = _STATIONARY[kind]
    except KeyError:
        raise ValueError(f"unknown preconditioner kind {kind!r}; "
                         f"have {sorted(_STATIONARY)}") from None
    return cls(A, **kwargs)


# -- field-split block preconditioner -------------------------------------------


class FieldSplitPreconditioner:
    """Exact inverse of [[A, B], [B^T, C]] with C standing in for the Schur
    complement:

        P^-1 = [[A^-1 + A^-1 B C^-1 B^T A^-1, -A^-1 B C^-1],
                [-C^-1 B^T A^-1,               C^-1        ]]

    applied multiplicatively with one C-solve and two A-solves.  ``inner_a``
    and ``inner_c`` are callables b -> x; their failures propagate tagged with
    the block identity.  With symmetric inner solves the operator is symmetric
    (and SPD when A and C are SPD).
    """

    def __init__(self, block: BlockJacobian, inner_a: Callable, inner_c: Callable):
        self._B = block.B.tocsr()
        self._Bt = block.B.T.tocsr()
        self._inner_a = inner_a
        self._inner_c = inner_c
        self._nu = block.nu
        self.shape = block.shape

    def _solve(self, inner, b, tag):
        try:
            return inner(b)
        except Exception as exc:  # noqa: BLE001 - re-tagged and re-raised
            raise InnerSolverError(tag, exc) from exc

    def matvec(self, r: np.ndarray) -> np.ndarray:
        ru, ra = r[: self._nu], r[self._nu:]
        y1 = self._solve(self._inner_a, ru, "A")
        z = self._solve(self._inner_c, ra - self._Bt @ y1, "C")
        xu = y1 - self._solve(self._inner_a, self._B @ z, "A")
        return np.concatenate([xu, z])


def fieldsplit_apply(precond: FieldSplitPreconditioner, r: np.ndarray) -> np.ndarray:
    """Apply the field-split preconditioner to a stacked residual."""
    return precond.matvec(r)


def inner_direct(M) -> Callable[[np.ndarray], np.ndarray]:
    """Exact inner solver: one LU factorization, reused per application."""
    if M.shape[0] == 0:
        return lambda b: np.zeros(0)
    fact = direct_factorize(M)
    return fact.solve


def inner_cg(M, budget: int = 5, precond_kind: str = "ssor") -> Callable[[np.ndarray], np.ndarray]:
    """Fixed-budget preconditioned CG inner solver (inexact, cheap)."""
    if M.shape[0] == 0:
        return lambda b: np.zeros(0)
    P = stationary_precond(M, precond_kind)

    def solve(b: np.ndarray) -> np.ndarray:
        x, _ = cg_solve(M, b, precond=P, rtol=1e-12, maxit=budget)
        return x

    return solve


def dump_matrix(path, A) -> None:
    """Write a matrix in MatrixMarket coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
