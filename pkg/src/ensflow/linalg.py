"""Sparse direct solves with factorization reuse across right-hand sides.

The compressed storage is scipy CSR; factorizations wrap SuperLU so that one
decomposition per time step serves every ensemble member. Saddle systems are
composed in the symmetric convention [[A, -B^T], [-B, 0]].
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class SingularMatrixError(RuntimeError):
    pass


def compose_saddle(A: sp.spmatrix, B: sp.spmatrix,
                   stabilization: sp.spmatrix | None = None) -> sp.csr_matrix:
    """[[A, -B^T], [-B, S]] block matrix for velocity-pressure coupling.

    The momentum rows carry -(p, div chi) and the (negated) continuity rows
    -(div u, q) = 0, so symmetric A gives a symmetric saddle matrix.
    """
    A = A.tocsr()
    B = B.tocsr()
    if A.shape[0] != A.shape[1] or B.shape[1] != A.shape[0]:
        raise ValueError(f"incompatible blocks A {A.shape}, B {B.shape}")
    S = stabilization
    if S is not None and S.shape != (B.shape[0], B.shape[0]):
        raise ValueError("stabilization block has wrong shape")
    M = sp.bmat([[A, -B.T], [-B, S]], format="csr")
    M.sort_indices()
    return M


class Factorization:
    """Reusable LU decomposition of a square sparse matrix."""

    def __init__(self, matrix: sp.spmatrix):
        matrix = matrix.tocsc()
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError("matrix must be square")
        if not np.all(np.isfinite(matrix.data)):
            raise ValueError("matrix has non-finite entries")
        self.shape = matrix.shape
        try:
            self._lu = splu(matrix)
        except RuntimeError as exc:  # SuperLU reports the failing pivot
            raise SingularMatrixError(str(exc)) from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.shape[0]:
            raise ValueError("right-hand side has wrong length")
        x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("solve produced non-finite values")
        return x


def factorize(M: sp.spmatrix) -> Factorization:
    return Factorization(M)


def solve_multi_rhs(F: Factorization, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for a matrix of right-hand-side columns."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    return F.solve(B)


def scaled_residual(M: sp.spmatrix, x: np.ndarray, b: np.ndarray,
                    matrix_norm: float | None = None) -> float:
    """||Mx - b|| / (||M|| ||x|| + ||b||), the per-solve accuracy measure."""
    if matrix_norm is None:
        matrix_norm = sp.linalg.norm(M, np.inf)
    r = np.linalg.norm(M @ x - b)
    denom = matrix_norm * np.linalg.norm(x) + np.linalg.norm(b)
    return r / denom if denom > 0 else r


class ConstrainedSystem:
    """A linear system with eliminated Dirichlet dofs and value lifting.

    Reduces A x = b under x[constrained] = g to
        A_ff x_f = b_f - A_fc g,
    keeping one factorization valid for every right-hand side and every
    constraint value vector (the matrix never changes across realizations).
    """

    def __init__(self, A: sp.spmatrix, constrained: np.ndarray):
        A = A.tocsr()
        n = A.shape[0]
        self.n = n
        self.constrained = np.asarray(constrained, dtype=np.int64)
        mask = np.ones(n, dtype=bool)
        mask[self.constrained] = False
        self.free = np.flatnonzero(mask)
        Af = A[self.free]
        self.A_ff = Af[:, self.free].tocsc()
        self.A_fc = Af[:, self.constrained].tocsr()
        self.factorization = factorize(self.A_ff)
        self._norm = sp.linalg.norm(self.A_ff, np.inf)

    def reduce_rhs(self, b: np.ndarray, g: np.ndarray) -> np.ndarray:
        rhs = b[self.free]
        if len(self.constrained):
            rhs = rhs - self.A_fc @ g
        return rhs

    def solve_columns(self, rhs_cols: np.ndarray, g_cols: np.ndarray,
                      check: bool = True) -> np.ndarray:
        """Solve for many realizations at once.

        rhs_cols : (n, J) full-size right-hand sides
        g_cols : (n_constrained, J) Dirichlet values per realization
        Returns (n, J) full solution vectors with constraints installed.
        """
        reduced = rhs_cols[self.free] - (self.A_fc @ g_cols
                                         if len(self.constrained) else 0.0)
        xf = solve_multi_rhs(self.factorization, reduced)
        if check:
            res = scaled_residual(self.A_ff, xf, reduced, self._norm)
            if res > 1e-9:
                raise SingularMatrixError(
                    f"solve residual {res:.3e} exceeds 1e-9")
        out = np.zeros((self.n, rhs_cols.shape[1]))
        out[self.free] = xf
        if len(self.constrained):
            out[self.constrained] = g_cols
        return out
