"""Numeric kernels: sparse SPD factorization, power-iteration norm estimate,
and PSD projection of small dense symmetric matrices.

The factorization facade binds CHOLMOD (via cvxopt), which both exploits
sparsity and rejects non-positive-definite input; the factor is reusable
across arbitrarily many solves without refactorization.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from cvxopt import cholmod, matrix, spmatrix

from .errors import NotPositiveDefinite


class SpdFactor:
    """Opaque Cholesky factorization of a sparse SPD matrix."""

    def __init__(self, factor, shape):
        self._factor = factor
        self.shape = shape

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve A x = b; b may be a vector or a matrix of right-hand sides."""
        b = np.asarray(b, dtype=np.float64)
        squeeze = b.ndim == 1
        cols = b.reshape(self.shape[0], -1, order="F") if squeeze else b
        rhs = matrix(np.asfortranarray(cols))
        cholmod.solve(self._factor, rhs)
        out = np.array(rhs).reshape(cols.shape)
        return out.ravel() if squeeze else out


def _to_cvxopt(A: sp.spmatrix) -> spmatrix:
    coo = sp.coo_matrix(A)
    return spmatrix(
        coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), size=coo.shape
    )


def spd_factorize(A) -> SpdFactor:
    """Factor a symmetric positive definite sparse matrix.

    Raises NotPositiveDefinite when the Cholesky factorization fails.
    """
    A = sp.csc_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    Ac = _to_cvxopt(sp.tril(A))
    factor = cholmod.symbolic(Ac)
    try:
        cholmod.numeric(Ac, factor)
    except ArithmeticError as exc:
        raise NotPositiveDefinite(f"sparse Cholesky failed: {exc}") from exc
    return SpdFactor(factor, A.shape)


def spd_solve(factor: SpdFactor, b: np.ndarray) -> np.ndarray:
    """Solve against a previously computed factorization."""
    return factor.solve(b)


def normest(A, tol: float = 1e-2, max_iterations: int = 100) -> float:
    """Power-iteration estimate of the 2-norm of a symmetric matrix.

    Starts from the deterministic all-ones vector so repeated runs agree
    bitwise; stops when successive estimates change by less than tol
    relative, or at the iteration cap.
    """
    n = A.shape[0]
    if n == 0:
        return 0.0
    x = np.ones(n) / np.sqrt(n)
    est = 0.0
    for _ in range(max_iterations):
        y = A @ x
        new_est = float(np.linalg.norm(y))
        if new_est == 0.0:
            return 0.0
        x = y / new_est
        if abs(new_est - est) <= tol * new_est:
            return new_est
        est = new_est
    return est


def psd_project(S: np.ndarray) -> np.ndarray:
    """Project a small dense symmetric matrix onto the PSD cone.

    Eigenvalues below zero are clamped to zero, which realizes the
    Frobenius-nearest PSD matrix.  Accepts a single (k, k) matrix or a
    stacked (..., k, k) batch.
    """
    S = np.asarray(S, dtype=np.float64)
    w, V = np.linalg.eigh(S)
    w = np.maximum(w, 0.0)
    out = (V * w[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))
