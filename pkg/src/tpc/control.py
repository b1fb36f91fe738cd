"""Closed-form control laws built on a fitted trajectory predictor.

Two modes. The strict mode forces the predictor slack to zero and solves the
unconstrained quadratic program directly: u* = -(F'QF + R)^-1 F'Q (P z_p -
yrf). The relaxed mode keeps the slack e_f with a quadratic penalty
lambda*||e_f||^2 and solves the joint stationarity system in (u_f, e_f);
small lambda lets the optimizer assume favorable slack realizations, which
lowers control effort but degrades tracking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, SingularSystemError
from .hankel import has_full_row_rank
from .predictors import Predictor

__all__ = [
    "QuadraticCost",
    "TpcGain",
    "make_gain",
    "control_delta0",
    "control_relaxed",
    "reference_preview",
]


@dataclass(frozen=True)
class QuadraticCost:
    """Per-step tracking weight Qy (PSD) and input weight Ru (PD) over horizon h."""

    Qy: np.ndarray
    Ru: np.ndarray
    h: int

    def __post_init__(self):
        Qy = np.atleast_2d(np.asarray(self.Qy, dtype=float))
        Ru = np.atleast_2d(np.asarray(self.Ru, dtype=float))
        if not np.allclose(Qy, Qy.T) or not np.allclose(Ru, Ru.T):
            raise DimensionError("Qy and Ru must be symmetric")
        if np.any(np.linalg.eigvalsh(Qy) < -1e-12):
            raise DimensionError("Qy must be positive semidefinite")
        if np.any(np.linalg.eigvalsh(Ru) <= 0.0):
            raise DimensionError("Ru must be positive definite")
        if self.h < 1:
            raise DimensionError(f"h must be >= 1, got {self.h}")
        object.__setattr__(self, "Qy", Qy)
        object.__setattr__(self, "Ru", Ru)

    @property
    def Q(self) -> np.ndarray:
        """Block-diagonal trajectory weight kron(I_h, Qy)."""
        return np.kron(np.eye(self.h), self.Qy)

    @property
    def R(self) -> np.ndarray:
        """Block-diagonal trajectory input weight kron(I_h, Ru)."""
        return np.kron(np.eye(self.h), self.Ru)


@dataclass(frozen=True)
class TpcGain:
    """Precomputed control gain so each step is a matvec or one cached solve."""

    P: np.ndarray
    F: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    mode: str  # "delta0" or "relaxed"
    n_u: int
    n_y: int
    lam: float | None = None
    G: np.ndarray | None = None  # delta0: (F'QF + R)^-1 F'Q
    block_cho: tuple | None = None  # relaxed: Cholesky of the stationarity matrix
    FtQ: np.ndarray | None = None

    @property
    def h(self) -> int:
        return self.F.shape[0] // self.n_y


def make_gain(pred: Predictor, cost: QuadraticCost, mode: str = "delta0",
              lam: float | None = None) -> TpcGain:
    """Precompute the control gain for a predictor and quadratic cost.

    delta0 mode caches G = (F'QF + R)^-1 F'Q; relaxed mode caches a Cholesky
    factorization of the joint (u_f, e_f) stationarity matrix and requires F
    to have full column rank.
    """
    if cost.h != pred.h or cost.Qy.shape[0] != pred.n_y or cost.Ru.shape[0] != pred.n_u:
        raise DimensionError(
            f"cost dims (h={cost.h}, n_y={cost.Qy.shape[0]}, n_u={cost.Ru.shape[0]}) "
            f"do not match predictor (h={pred.h}, n_y={pred.n_y}, n_u={pred.n_u})"
        )
    Q, R = cost.Q, cost.R
    F = pred.F
    FtQ = F.T @ Q
    Hmat = FtQ @ F + R
    if mode == "delta0":
        try:
            cho = scipy.linalg.cho_factor(Hmat)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"F'QF + R is not positive definite: {exc}") from exc
        G = scipy.linalg.cho_solve(cho, FtQ)
        return TpcGain(P=pred.P, F=F, Q=Q, R=R, mode=mode, G=G, FtQ=FtQ,
                       n_y=pred.n_y, n_u=pred.n_u)
    if mode == "relaxed":
        if lam is None or lam <= 0.0:
            raise ValueError("relaxed mode needs a positive lambda")
        if not has_full_row_rank(F.T):
            raise SingularSystemError(
                "relaxed-mode block system requires F to have full column rank"
            )
        hny = F.shape[0]
        top = np.hstack([Hmat, FtQ])
        bottom = np.hstack([Q @ F, Q + lam * np.eye(hny)])
        block = np.vstack([top, bottom])
        try:
            cho = scipy.linalg.cho_factor(block)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"relaxed block system is singular: {exc}") from exc
        return TpcGain(P=pred.P, F=F, Q=Q, R=R, mode=mode, lam=lam,
                       block_cho=cho, FtQ=FtQ, n_y=pred.n_y, n_u=pred.n_u)
    raise ValueError(f"unknown mode {mode!r}")


def control_delta0(g: TpcGain, z_p: np.ndarray, yrf_hat: np.ndarray) -> np.ndarray:
    """Optimal planned inputs -G (P z_p - yrf_hat); apply the first block."""
    if g.mode != "delta0":
        raise ValueError("gain was not built in delta0 mode")
    err = g.P @ z_p - yrf_hat
    if err.shape[0] != g.F.shape[0]:
        raise DimensionError("yrf_hat length does not match the predictor horizon")
    return -(g.G @ err)


def control_relaxed(g: TpcGain, z_p: np.ndarray,
                    yrf_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jointly optimal (u_f, e_f) for the slack-regularized problem.

    Solves the stationarity system
        [F'QF + R, F'Q; QF, Q + lam I] (u_f, e_f) = -[F'; I] Q (P z_p - yrf)
    which is the gradient of ||y_f - yrf||_Q^2 + ||u_f||_R^2 + lam ||e_f||^2
    after eliminating y_f = P z_p + F u_f + e_f.
    """
    if g.mode != "relaxed":
        raise ValueError("gain was not built in relaxed mode")
    err = g.P @ z_p - yrf_hat
    if err.shape[0] != g.F.shape[0]:
        raise DimensionError("yrf_hat length does not match the predictor horizon")
    rhs = -np.concatenate([g.FtQ @ err, g.Q @ err])
    sol = scipy.linalg.cho_solve(g.block_cho, rhs)
    k = g.F.shape[1]
    return sol[:k], sol[k:]


def reference_preview(y_r_prev: np.ndarray, h: int) -> np.ndarray:
    """Persistence reference preview: h stacked copies of the last reference."""
    y_r_prev = np.asarray(y_r_prev, dtype=float).reshape(-1)
    return np.tile(y_r_prev, h)
