"""Shared matrix machinery: least squares, block LQ, block-triangular masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, RankDeficientError, SingularSystemError
from .hankel import DEFAULT_RANK_TOL, has_full_row_rank, numerical_rank

__all__ = [
    "LQDecomposition",
    "lq_decompose",
    "ls_fit",
    "blt_project",
    "is_blt",
]


@dataclass(frozen=True)
class LQDecomposition:
    """L factor blocks and orthonormal-row Q blocks of a stacked [Z; U; Y].

    Row partitions fall at the Z/U and U/Y boundaries, so L11, L22, L33 are
    square lower triangular and each Qi has orthonormal rows.
    """

    L11: np.ndarray
    L21: np.ndarray
    L22: np.ndarray
    L31: np.ndarray
    L32: np.ndarray
    L33: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray

    def recompose(self) -> np.ndarray:
        """Rebuild the stacked input matrix from the factors."""
        r1 = self.L11 @ self.Q1
        r2 = self.L21 @ self.Q1 + self.L22 @ self.Q2
        r3 = self.L31 @ self.Q1 + self.L32 @ self.Q2 + self.L33 @ self.Q3
        return np.vstack([r1, r2, r3])


def lq_decompose(Z: np.ndarray, U: np.ndarray, Y: np.ndarray) -> LQDecomposition:
    """LQ decomposition of the stacked [Z; U; Y], partitioned at the block rows.

    Computed as the QR decomposition of the transpose; the diagonal of L is
    normalized to be nonnegative. Requires at least as many columns as rows.
    """
    Z, U, Y = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (Z, U, Y))
    if not (Z.shape[1] == U.shape[1] == Y.shape[1]):
        raise DimensionError(
            f"column counts differ: Z has {Z.shape[1]}, U has {U.shape[1]}, Y has {Y.shape[1]}"
        )
    p, q = Z.shape[0], U.shape[0]
    S = np.vstack([Z, U, Y])
    rows, cols = S.shape
    if rows > cols:
        raise DimensionError(
            f"stacked matrix has {rows} rows but only {cols} columns; "
            "the LQ decomposition needs at least as many columns as rows"
        )
    Qt, Rt = np.linalg.qr(S.T, mode="reduced")
    L = Rt.T.copy()
    Q = Qt.T.copy()
    signs = np.where(np.diag(L) < 0.0, -1.0, 1.0)
    L *= signs[np.newaxis, :]
    Q *= signs[:, np.newaxis]
    return LQDecomposition(
        L11=L[:p, :p],
        L21=L[p : p + q, :p],
        L22=L[p : p + q, p : p + q],
        L31=L[p + q :, :p],
        L32=L[p + q :, p : p + q],
        L33=L[p + q :, p + q :],
        Q1=Q[:p],
        Q2=Q[p : p + q],
        Q3=Q[p + q :],
    )


def lq_partial(
    Z: np.ndarray, U: np.ndarray, Y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The L blocks that the predictor fits actually use.

    Factors only the stacked [Z; U] and projects Y onto its orthonormal
    rows, returning (L11, L21, L22, L31, L32). Identical to the Y-relevant
    blocks of lq_decompose, but valid whenever [Z; U] itself has at least as
    many columns as rows, which is all the fits require.
    """
    Z, U, Y = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (Z, U, Y))
    if not (Z.shape[1] == U.shape[1] == Y.shape[1]):
        raise DimensionError(
            f"column counts differ: Z has {Z.shape[1]}, U has {U.shape[1]}, Y has {Y.shape[1]}"
        )
    p = Z.shape[0]
    X = np.vstack([Z, U])
    if X.shape[0] > X.shape[1]:
        raise DimensionError(
            f"stacked [Z; U] has {X.shape[0]} rows but only {X.shape[1]} columns"
        )
    Qt, Rt = np.linalg.qr(X.T, mode="reduced")
    L = Rt.T.copy()
    Q = Qt.T.copy()
    signs = np.where(np.diag(L) < 0.0, -1.0, 1.0)
    L *= signs[np.newaxis, :]
    Q *= signs[:, np.newaxis]
    L31 = Y @ Q[:p].T
    L32 = Y @ Q[p:].T
    return L[:p, :p], L[p:, :p], L[p:, p:], L31, L32


def ls_fit(
    Ytarget: np.ndarray,
    X: np.ndarray,
    tol: float = DEFAULT_RANK_TOL,
    name: str = "regressor",
) -> np.ndarray:
    """Least squares coefficient matrix Theta minimizing ||Ytarget - Theta X||.

    X must have full row rank; the solution is then the unique minimizer of
    the mean squared error and equals Ytarget X^T (X X^T)^-1. Solved through
    an orthogonal factorization of X^T rather than the normal equations.
    """
    Ytarget = np.atleast_2d(np.asarray(Ytarget, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if Ytarget.shape[1] != X.shape[1]:
        raise DimensionError(
            f"target has {Ytarget.shape[1]} columns but {name} has {X.shape[1]}"
        )
    if not has_full_row_rank(X, tol):
        raise RankDeficientError(
            f"{name} ({X.shape[0]}x{X.shape[1]}) is rank deficient: "
            f"numerical rank {numerical_rank(X, tol)} < {X.shape[0]}",
            matrix_name=name,
            numerical_rank=numerical_rank(X, tol),
        )
    theta_t, *_ = np.linalg.lstsq(X.T, Ytarget.T, rcond=None)
    return theta_t.T


def _check_blocks(M: np.ndarray, row_block: int, col_block: int) -> tuple[int, int]:
    M = np.atleast_2d(M)
    if row_block < 1 or col_block < 1:
        raise DimensionError("block sizes must be positive")
    if M.shape[0] % row_block or M.shape[1] % col_block:
        raise DimensionError(
            f"matrix {M.shape[0]}x{M.shape[1]} is not divisible into "
            f"{row_block}x{col_block} blocks"
        )
    return M.shape[0] // row_block, M.shape[1] // col_block


def blt_project(
    M: np.ndarray, row_block: int, col_block: int, strict: bool = False
) -> np.ndarray:
    """Zero the (strictly) block upper triangular part of M.

    Block (i, j) is zeroed when j > i, or j >= i if strict. Orthogonal
    projection in the Frobenius sense, and idempotent.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    nb_r, nb_c = _check_blocks(M, row_block, col_block)
    out = M.copy()
    for i in range(nb_r):
        j0 = i + (0 if strict else 1)
        if j0 < nb_c:
            out[i * row_block : (i + 1) * row_block, j0 * col_block :] = 0.0
    return out


def is_blt(
    M: np.ndarray,
    row_block: int,
    col_block: int,
    strict: bool = False,
    tol: float = 0.0,
) -> bool:
    """True iff every (strictly) upper block of M has max-abs entry <= tol."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    nb_r, nb_c = _check_blocks(M, row_block, col_block)
    for i in range(nb_r):
        j0 = i + (0 if strict else 1)
        if j0 < nb_c:
            upper = M[i * row_block : (i + 1) * row_block, j0 * col_block :]
            if upper.size and np.max(np.abs(upper)) > tol:
                return False
    return True


def solve_lower_from_right(B: np.ndarray, L: np.ndarray, what: str = "L") -> np.ndarray:
    """Solve X L = B for X with L square lower triangular."""
    d = np.abs(np.diag(L))
    if d.size == 0 or np.min(d) <= DEFAULT_RANK_TOL * max(np.max(d), 1e-300):
        raise SingularSystemError(f"{what} is numerically singular (diagonal {d})")
    return scipy.linalg.solve_triangular(L.T, B.T, lower=False).T


def solve_unit_lower(Lunit: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve Lunit X = B with Lunit lower triangular and unit diagonal."""
    return scipy.linalg.solve_triangular(Lunit, B, lower=True, unit_diagonal=True)
