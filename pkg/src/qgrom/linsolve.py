"""Sparse iterative solvers for the per-step linear systems.

Two Krylov solvers with Jacobi (diagonal) preconditioning: conjugate
gradients for the symmetric positive-definite stream-function system and
BiCGStab for the non-symmetric transport system. Both are deterministic:
no randomized starts, fixed reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class ConvergenceError(RuntimeError):
    """Raised by callers that cannot proceed after a failed solve."""


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    final_residual: float  # relative, ||Ax - b|| / ||b||
    converged: bool


class SparseMatrix:
    """Square sparse matrix in compressed-row storage."""

    def __init__(self, n: int, indptr: np.ndarray, indices: np.ndarray,
                 data: np.ndarray, _skip_checks: bool = False):
        self.n = int(n)
        self._csr = sp.csr_matrix((data, indices, indptr), shape=(self.n, self.n))
        if not _skip_checks:
            self._validate()

    @classmethod
    def from_coo(cls, n: int, rows, cols, vals) -> "SparseMatrix":
        """Build from triplets; duplicate (row, col) entries are summed."""
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(n, m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "SparseMatrix":
        m = sp.csr_matrix(np.asarray(a, dtype=float))
        return cls(a.shape[0], m.indptr, m.indices, m.data)

    def _validate(self) -> None:
        indptr, indices = self._csr.indptr, self._csr.indices
        if indptr.shape[0] != self.n + 1:
            raise ValueError("row pointer length does not match dimension")
        if np.any(np.diff(indptr) < 0):
            raise ValueError("row pointers must be monotone")
        if indices.size == 0:
            return
        if indices.min() < 0 or indices.max() >= self.n:
            raise ValueError("column index out of range")
        # columns strictly increasing within a row => sorted, duplicate-free
        if indices.size > 1:
            within_row = np.ones(indices.size - 1, dtype=bool)
            starts = indptr[1:-1]
            starts = starts[(starts > 0) & (starts < indices.size)]
            within_row[starts - 1] = False
            if np.any(np.diff(indices)[within_row] <= 0):
                raise ValueError("duplicate or unsorted column indices in a row")

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def data(self) -> np.ndarray:
        return self._csr.data

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self._csr @ x

    def diagonal(self) -> np.ndarray:
        return self._csr.diagonal()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()


def _jacobi_inverse(a: SparseMatrix) -> np.ndarray:
    d = a.diagonal()
    if np.any(d == 0.0):
        raise ValueError("zero diagonal entry; Jacobi preconditioner undefined")
    return 1.0 / d


def solve_spd(a: SparseMatrix, b: np.ndarray, tol: float = 1e-8,
              max_iter: int = 10000) -> tuple[np.ndarray, SolverReport]:
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Returns the iterate and a report; ``converged`` guarantees the true
    relative residual ||Ax - b||/||b|| is at or below ``tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(a.n), SolverReport(0, 0.0, True)

    minv = _jacobi_inverse(a)
    x = np.zeros(a.n)
    r = b.copy()
    z = minv * r
    p = z.copy()
    rz = r @ z
    r_norm = b_norm
    it = 0
    while it < max_iter:
        if r_norm <= tol * b_norm:
            # recurrence says done; confirm with a fresh residual
            true_r = b - (a @ x)
            r_norm = np.linalg.norm(true_r)
            if r_norm <= tol * b_norm:
                return x, SolverReport(it, r_norm / b_norm, True)
            r = true_r
            z = minv * r
            p = z.copy()
            rz = r @ z
        ap = a @ p
        pap = p @ ap
        if pap <= 0.0:
            break  # matrix not SPD as promised
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        it += 1
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        r_norm = np.linalg.norm(r)

    true_res = np.linalg.norm(b - (a @ x)) / b_norm
    return x, SolverReport(it, true_res, bool(true_res <= tol))


def solve_general(a: SparseMatrix, b: np.ndarray, tol: float = 1e-8,
                  max_iter: int = 10000) -> tuple[np.ndarray, SolverReport]:
    """Jacobi-preconditioned BiCGStab for nonsingular systems."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros(a.n), SolverReport(0, 0.0, True)

    minv = _jacobi_inverse(a)
    x = np.zeros(a.n)
    r = b.copy()
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros(a.n)
    p = np.zeros(a.n)
    it = 0
    while it < max_iter:
        rho_new = r_hat @ r
        if rho_new == 0.0 or (it > 0 and omega == 0.0):
            break  # breakdown
        if it == 0:
            p = r.copy()
        else:
            beta = (rho_new / rho) * (alpha / omega)
            p = r + beta * (p - omega * v)
        rho = rho_new
        p_hat = minv * p
        v = a @ p_hat
        denom = r_hat @ v
        if denom == 0.0:
            break
        alpha = rho / denom
        s = r - alpha * v
        it += 1
        if np.linalg.norm(s) <= tol * b_norm:
            x += alpha * p_hat
            true_res = np.linalg.norm(b - (a @ x))
            if true_res <= tol * b_norm:
                return x, SolverReport(it, true_res / b_norm, True)
            r = b - (a @ x)
            r_hat = r.copy()
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            continue
        s_hat = minv * s
        t = a @ s_hat
        tt = t @ t
        if tt == 0.0:
            break
        omega = (t @ s) / tt
        x += alpha * p_hat + omega * s_hat
        r = s - omega * t
        if np.linalg.norm(r) <= tol * b_norm:
            true_res = np.linalg.norm(b - (a @ x))
            if true_res <= tol * b_norm:
                return x, SolverReport(it, true_res / b_norm, True)

    true_res = np.linalg.norm(b - (a @ x)) / b_norm
    return x, SolverReport(it, true_res, bool(true_res <= tol))
