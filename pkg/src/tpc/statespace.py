"""State-space trajectory predictor: one-step fit lifted to an LTI realization.

The recent input/output history z_p serves as the state, so the realization
needs no state estimator. A single one-step-ahead regression gives (C, D);
the remaining matrices are structural: A shifts the history and appends
(u(t), y(t)), B injects the new input, K injects the innovation into the
new output slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomp import ls_fit
from .errors import DimensionError, InsufficientDataError
from .hankel import HankelSet, PredictorKind, min_examples
from .predictors import PhiTriple, Predictor, _with_covariances, phi_to_pf

__all__ = [
    "InnovationsModel",
    "fit_onestep",
    "assemble_system",
    "build_phi",
    "fit_statespace",
    "simulate_innovations",
    "verify_theorem3",
    "Theorem3Report",
]


@dataclass(frozen=True)
class InnovationsModel:
    """(A, B, C, D, K) realization with the input/output history as state.

    cal_A = A - K C and cal_B = B - K D are cached because every multistep
    quantity is built from powers of cal_A.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    K: np.ndarray
    m: int
    n_u: int
    n_y: int

    @property
    def n_z(self) -> int:
        return self.n_u + self.n_y

    @property
    def cal_A(self) -> np.ndarray:
        return self.A - self.K @ self.C

    @property
    def cal_B(self) -> np.ndarray:
        return self.B - self.K @ self.D


def fit_onestep(H: HankelSet) -> tuple[np.ndarray, np.ndarray]:
    """One-step-ahead fit [C D] = Y1 [Z1; U1]^+ over the d - m examples."""
    need = min_examples(PredictorKind.STATE_SPACE, H.m, H.h, H.n_u, H.n_y)
    d = H.n1 + H.m
    if d < need:
        raise InsufficientDataError(
            f"state_space predictor with m={H.m}, n_u={H.n_u}, n_y={H.n_y} "
            f"needs at least d = {need} samples, got d = {d}",
            minimum=need,
        )
    X = np.vstack([H.Z1, H.U1])
    CD = ls_fit(H.Y1, X, name="stacked [Z1; U1]")
    k = H.m * H.n_z
    return CD[:, :k], CD[:, k:]


def assemble_system(C: np.ndarray, D: np.ndarray, m: int, n_u: int, n_y: int) -> InnovationsModel:
    """Build the structural (A, B, K) around a fitted (C, D).

    The state update shifts the stacked history up by one block and appends
    z(t) = (u(t), y(t)) with y(t) = C z_p(t) + D u(t) + eps(t).
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    n_z = n_u + n_y
    if C.shape != (n_y, m * n_z):
        raise DimensionError(f"C has shape {C.shape}, expected ({n_y}, {m * n_z})")
    if D.shape != (n_y, n_u):
        raise DimensionError(f"D has shape {D.shape}, expected ({n_y}, {n_u})")
    A = np.zeros((m * n_z, m * n_z))
    A[: (m - 1) * n_z, n_z:] = np.eye((m - 1) * n_z)
    A[m * n_z - n_y :, :] = C
    B = np.zeros((m * n_z, n_u))
    B[(m - 1) * n_z : (m - 1) * n_z + n_u, :] = np.eye(n_u)
    B[m * n_z - n_y :, :] = D
    K = np.zeros((m * n_z, n_y))
    K[m * n_z - n_y :, :] = np.eye(n_y)
    return InnovationsModel(A=A, B=B, C=C, D=D, K=K, m=m, n_u=n_u, n_y=n_y)


def build_phi(model: InnovationsModel, h: int) -> PhiTriple:
    """Observability rows and Markov-parameter Toeplitz blocks for horizon h.

    Row block i of Phi_p is C cal_A^(i-1); Phi_u carries D on the diagonal
    and C cal_A^(i-j-1) cal_B below; Phi_y is strictly lower with
    C cal_A^(i-j-1) K.
    """
    if h < 1:
        raise DimensionError(f"h must be >= 1, got {h}")
    n_y, n_u = model.n_y, model.n_u
    calA, calB, K = model.cal_A, model.cal_B, model.K
    Phi_p = np.zeros((h * n_y, model.m * model.n_z))
    Phi_u = np.zeros((h * n_y, h * n_u))
    Phi_y = np.zeros((h * n_y, h * n_y))
    CAi = model.C.copy()  # C cal_A^0, then C cal_A^1, ...
    markov_u = [model.C @ calB]  # C cal_A^i cal_B for i = 0, 1, ...
    markov_y = [model.C @ K]
    Phi_p[:n_y] = CAi
    for i in range(1, h):
        CAi = CAi @ calA
        Phi_p[i * n_y : (i + 1) * n_y] = CAi
        markov_u.append(CAi @ calB)
        markov_y.append(CAi @ K)
    for i in range(h):
        Phi_u[i * n_y : (i + 1) * n_y, i * n_u : (i + 1) * n_u] = model.D
        for j in range(i):
            Phi_u[i * n_y : (i + 1) * n_y, j * n_u : (j + 1) * n_u] = markov_u[i - j - 1]
            Phi_y[i * n_y : (i + 1) * n_y, j * n_y : (j + 1) * n_y] = markov_y[i - j - 1]
    return PhiTriple(Phi_p=Phi_p, Phi_u=Phi_u, Phi_y=Phi_y, n_u=n_u, n_y=n_y)


def fit_statespace(H: HankelSet, h: int | None = None) -> tuple[Predictor, InnovationsModel]:
    """Identify the state-space predictor from a Hankel set.

    One-step fit, structural realization, Markov-parameter assembly, then
    conversion to (P, F).
    """
    if h is None:
        h = H.h
    if h != H.h:
        raise DimensionError(f"requested h={h} but the Hankel set was built with h={H.h}")
    C, D = fit_onestep(H)
    model = assemble_system(C, D, H.m, H.n_u, H.n_y)
    phi = build_phi(model, h)
    P, F = phi_to_pf(phi)
    pred = Predictor(P=P, F=F, kind=PredictorKind.STATE_SPACE,
                     m=H.m, h=h, n_u=H.n_u, n_y=H.n_y)
    return _with_covariances(pred, H), model


def simulate_innovations(
    model: InnovationsModel,
    z_p0: np.ndarray,
    u_seq: np.ndarray,
    eps_seq: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Forward-simulate the realization for len(u_seq) steps.

    Returns the outputs (h, n_y) and the state trajectory (h + 1, m*n_z)
    including the initial state.
    """
    z = np.asarray(z_p0, dtype=float).reshape(-1)
    u_seq = np.asarray(u_seq, dtype=float).reshape(-1, model.n_u)
    eps_seq = np.asarray(eps_seq, dtype=float).reshape(-1, model.n_y)
    if z.shape[0] != model.m * model.n_z:
        raise DimensionError(f"z_p0 has length {z.shape[0]}, expected {model.m * model.n_z}")
    if u_seq.shape[0] != eps_seq.shape[0]:
        raise DimensionError("u_seq and eps_seq must cover the same number of steps")
    steps = u_seq.shape[0]
    ys = np.zeros((steps, model.n_y))
    zs = np.zeros((steps + 1, z.shape[0]))
    zs[0] = z
    for t in range(steps):
        y = model.C @ z + model.D @ u_seq[t] + eps_seq[t]
        z = model.A @ z + model.B @ u_seq[t] + model.K @ eps_seq[t]
        ys[t] = y
        zs[t + 1] = z
    return ys, zs


@dataclass(frozen=True)
class Theorem3Report:
    trials: int
    tol: float
    max_deviation: float
    passed: bool


def verify_theorem3(
    model: InnovationsModel,
    pred: Predictor,
    trials: int = 1000,
    tol: float = 1e-9,
    rng: np.random.Generator | None = None,
) -> Theorem3Report:
    """Check the predictor/realization equivalence on random draws.

    For random (z_p, u_f, eps_f), the h-step simulation of the realization
    must match P z_p + F u_f + (I - Phi_y)^-1 eps_f. The identity is exact;
    any deviation beyond roundoff indicates a broken fit.
    """
    rng = rng or np.random.default_rng(0)
    h = pred.h
    phi = build_phi(model, h)
    eye = np.eye(h * pred.n_y)
    from .decomp import solve_unit_lower

    max_dev = 0.0
    for _ in range(trials):
        z_p = rng.standard_normal(pred.m * pred.n_z)
        u_f = rng.standard_normal(h * pred.n_u)
        eps = rng.standard_normal(h * pred.n_y)
        ys, _ = simulate_innovations(model, z_p, u_f.reshape(h, pred.n_u),
                                     eps.reshape(h, pred.n_y))
        lhs = ys.reshape(-1)
        rhs = pred.P @ z_p + pred.F @ u_f + solve_unit_lower(eye - phi.Phi_y, eps)
        max_dev = max(max_dev, float(np.max(np.abs(lhs - rhs))))
    return Theorem3Report(trials=trials, tol=tol, max_deviation=max_dev,
                          passed=max_dev <= tol)
