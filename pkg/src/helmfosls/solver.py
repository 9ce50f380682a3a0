"""Complex sparse linear solvers for the assembled systems.

The least-squares system is Hermitian positive definite and is solved by
Jacobi-preconditioned conjugate gradients (dense Cholesky below 2000
unknowns).  The classical FEM system is complex symmetric indefinite and
goes through (sparse) LU with partial pivoting.  The reported residual
is always recomputed from the matrix, never taken from the iteration.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .fosls import CLASSICAL_FEM, FOSLS

RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """Solve failed; carries the residual history when iterating."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = residual_history or []


@dataclass
class SolveReport:
    """Solution vector with iteration count (0 for direct solves)."""

    solution: np.ndarray
    iterations: int
    relative_residual: float
    residual_history: list = field(default_factory=list)


def _relative_residual(matrix, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(matrix @ x - b)
    return float(r / nb) if nb > 0 else float(r)


def _pcg(matrix, b, rtol, max_iter):
    """Conjugate gradients with Jacobi preconditioning (Hermitian PD)."""
    diag = matrix.diagonal().real
    if np.any(diag <= 0):
        raise SolverError("matrix has nonpositive diagonal; not HPD")
    x = np.zeros_like(b)
    r = b.copy()
    nb = np.linalg.norm(b)
    if nb == 0:
        return x, 0, []
    history = []
    z = r / diag
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, max_iter + 1):
        Ap = matrix @ p
        alpha = rz / np.vdot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r) / nb
        history.append(res)
        if res <= rtol:
            return x, it, history
        z = r / diag
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"CG did not reach rtol={rtol:g} within {max_iter} iterations "
        f"(last residual {history[-1]:.3e})",
        residual_history=history,
    )


def solve_hpd(system, dense_threshold=2000):
    """Solve a Hermitian positive definite least-squares system."""
    if system.kind != FOSLS:
        raise ValueError("solve_hpd expects a least-squares system")
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    if n <= dense_threshold:
        try:
            c, low = scipy.linalg.cho_factor(A.toarray())
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"Cholesky factorization failed: {exc}") from exc
        x = scipy.linalg.cho_solve((c, low), b)
        iterations, history = 0, []
    else:
        x, iterations, history = _pcg(A, b, RESIDUAL_TOL, max_iter=20 * n)
    res = _relative_residual(A, x, b)
    if res > RESIDUAL_TOL:
        raise SolverError(
            f"residual {res:.3e} above tolerance {RESIDUAL_TOL:g}",
            residual_history=history,
        )
    return SolveReport(x, iterations, res, history)


def solve_general(system, dense_threshold=2000):
    """Solve a general (complex symmetric indefinite) system by LU."""
    if system.kind != CLASSICAL_FEM:
        raise ValueError("solve_general expects a classical FEM system")
    A, b = system.matrix, system.rhs
    n = A.shape[0]
    try:
        if n <= dense_threshold:
            lu, piv = scipy.linalg.lu_factor(A.toarray())
            x = scipy.linalg.lu_solve((lu, piv), b)
        else:
            x = scipy.sparse.linalg.splu(A.tocsc()).solve(b)
    except (RuntimeError, np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"LU solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("LU solve produced non-finite entries (singular matrix?)")
    res = _relative_residual(A, x, b)
    if res > RESIDUAL_TOL:
        raise SolverError(f"residual {res:.3e} above tolerance {RESIDUAL_TOL:g}")
    return SolveReport(x, 0, res)
