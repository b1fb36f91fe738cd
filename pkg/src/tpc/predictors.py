"""Identification of trajectory predictors and their evaluation.

A trajectory predictor is a pair (P, F) mapping the recent input/output
history z_p and a planned input trajectory u_f to a predicted output
trajectory y_f = P z_p + F u_f. The causal predictors (multistep, transient,
fixed-length, state-space) keep F block lower triangular so planned inputs
cannot affect earlier predicted outputs.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .decomp import (
    blt_project,
    is_blt,
    lq_partial,
    ls_fit,
    solve_lower_from_right,
    solve_unit_lower,
)
from .errors import DimensionError, InsufficientDataError, RankDeficientError, TpcError
from .hankel import (
    HankelSet,
    PredictorKind,
    TrajectoryData,
    build_hankel,
    min_examples,
)

__all__ = [
    "Predictor",
    "PhiTriple",
    "fit_subspace",
    "fit_subspace_lq",
    "fit_multistep",
    "fit_transient",
    "fit_fixed_length",
    "fit_predictor",
    "predict",
    "test_rmse",
    "select_memory",
    "error_covariance",
    "phi_to_pf",
    "save_predictor",
    "load_predictor",
]

log = logging.getLogger("tpc")


@dataclass(frozen=True)
class Predictor:
    """Fitted (P, F) pair with error-covariance estimates.

    P maps the stacked history z_p (m*n_z,) and F the planned inputs u_f
    (h*n_u,) to the predicted outputs y_f (h*n_y,).
    """

    P: np.ndarray
    F: np.ndarray
    kind: PredictorKind
    m: int
    h: int
    n_u: int
    n_y: int
    onestep_error_cov: np.ndarray | None = None
    traj_error_cov: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        hp, wp = self.P.shape
        hf, wf = self.F.shape
        if hp != self.h * self.n_y or wp != self.m * self.n_z:
            raise DimensionError(f"P has shape {self.P.shape}, expected "
                                 f"({self.h * self.n_y}, {self.m * self.n_z})")
        if hf != self.h * self.n_y or wf != self.h * self.n_u:
            raise DimensionError(f"F has shape {self.F.shape}, expected "
                                 f"({self.h * self.n_y}, {self.h * self.n_u})")

    @property
    def n_z(self) -> int:
        return self.n_u + self.n_y

    @property
    def is_causal(self) -> bool:
        return is_blt(self.F, self.n_y, self.n_u, tol=0.0)


@dataclass(frozen=True)
class PhiTriple:
    """Raw predictor coefficients before elimination of intermediate outputs.

    Phi_u must be block lower triangular and Phi_y strictly so; both are
    checked exactly at construction because the fits place structural zeros,
    they never estimate them.
    """

    Phi_p: np.ndarray
    Phi_u: np.ndarray
    Phi_y: np.ndarray
    n_u: int
    n_y: int

    def __post_init__(self):
        if not is_blt(self.Phi_u, self.n_y, self.n_u, strict=False, tol=0.0):
            raise DimensionError("Phi_u must be block lower triangular")
        if not is_blt(self.Phi_y, self.n_y, self.n_y, strict=True, tol=0.0):
            raise DimensionError("Phi_y must be strictly block lower triangular")


def phi_to_pf(phi: PhiTriple) -> tuple[np.ndarray, np.ndarray]:
    """Convert raw coefficients to (P, F) by eliminating intermediate outputs.

    I - Phi_y is unit lower triangular, so the solve is exact forward
    substitution.
    """
    eye = np.eye(phi.Phi_y.shape[0])
    P = solve_unit_lower(eye - phi.Phi_y, phi.Phi_p)
    F = solve_unit_lower(eye - phi.Phi_y, phi.Phi_u)
    return P, F


def _require_min_examples(H: HankelSet, kind: PredictorKind) -> None:
    d = H.n1 + H.m  # raw sample count
    need = min_examples(kind, H.m, H.h, H.n_u, H.n_y)
    if d < need:
        raise InsufficientDataError(
            f"{kind.value} predictor with m={H.m}, h={H.h}, n_u={H.n_u}, "
            f"n_y={H.n_y} needs at least d = {need} samples, got d = {d}",
            minimum=need,
        )


def _with_covariances(pred: Predictor, H: HankelSet) -> Predictor:
    onestep, traj = error_covariance(pred, H)
    return replace(pred, onestep_error_cov=onestep, traj_error_cov=traj)


def fit_subspace(H: HankelSet) -> Predictor:
    """Least-squares (P, F) from the pseudoinverse of the stacked [Z; U].

    Minimizes the mean squared error ||Y - P Z - F U||^2 / n. Generally not
    causal: F comes out dense.
    """
    _require_min_examples(H, PredictorKind.SUBSPACE)
    X = np.vstack([H.Z, H.U])
    PF = ls_fit(H.Y, X, name="stacked [Z; U]")
    k = H.m * H.n_z
    pred = Predictor(P=PF[:, :k], F=PF[:, k:], kind=PredictorKind.SUBSPACE,
                     m=H.m, h=H.h, n_u=H.n_u, n_y=H.n_y)
    return _with_covariances(pred, H)


def fit_subspace_lq(H: HankelSet) -> Predictor:
    """Subspace predictor computed from the block LQ factors.

    F = L32 L22^-1 and P = (L31 - F L21) L11^-1; agrees with fit_subspace
    whenever [Z; U] has full row rank.
    """
    _require_min_examples(H, PredictorKind.SUBSPACE)
    L11, L21, L22, L31, L32 = lq_partial(H.Z, H.U, H.Y)
    F = solve_lower_from_right(L32, L22, what="L22")
    P = solve_lower_from_right(L31 - F @ L21, L11, what="L11")
    pred = Predictor(P=P, F=F, kind=PredictorKind.SUBSPACE,
                     m=H.m, h=H.h, n_u=H.n_u, n_y=H.n_y)
    return _with_covariances(pred, H)


def fit_multistep(H: HankelSet) -> Predictor:
    """Causalized subspace predictor: F = BLT(L32) L22^-1.

    Solves the least squares problem constrained to block-lower-triangular F;
    L22^-1 is lower triangular so the product stays block lower triangular.
    """
    _require_min_examples(H, PredictorKind.MULTISTEP)
    L11, L21, L22, L31, L32 = lq_partial(H.Z, H.U, H.Y)
    F = solve_lower_from_right(
        blt_project(L32, H.n_y, H.n_u), L22, what="L22"
    )
    P = solve_lower_from_right(L31 - F @ L21, L11, what="L11")
    pred = Predictor(P=P, F=F, kind=PredictorKind.MULTISTEP,
                     m=H.m, h=H.h, n_u=H.n_u, n_y=H.n_y)
    return _with_covariances(pred, H)


def fit_transient(H: HankelSet) -> Predictor:
    """Per-step regressions on history, planned inputs, and intermediate outputs.

    Step i regresses the i-th output block on [Z; U(1..i); Y(1..i-1)]; the
    assembled Phi triple is then converted to (P, F).
    """
    _require_min_examples(H, PredictorKind.TRANSIENT)
    m, h, n_u, n_y = H.m, H.h, H.n_u, H.n_y
    mnz = m * H.n_z
    Phi_p = np.zeros((h * n_y, mnz))
    Phi_u = np.zeros((h * n_y, h * n_u))
    Phi_y = np.zeros((h * n_y, h * n_y))
    for i in range(1, h + 1):
        X = np.vstack([H.Z, H.u_blocks(i), H.y_blocks(i - 1)])
        theta = ls_fit(H.y_block(i), X, name=f"step-{i} regressor")
        r = slice((i - 1) * n_y, i * n_y)
        Phi_p[r] = theta[:, :mnz]
        Phi_u[r, : i * n_u] = theta[:, mnz : mnz + i * n_u]
        Phi_y[r, : (i - 1) * n_y] = theta[:, mnz + i * n_u :]
    phi = PhiTriple(Phi_p=Phi_p, Phi_u=Phi_u, Phi_y=Phi_y, n_u=n_u, n_y=n_y)
    P, F = phi_to_pf(phi)
    pred = Predictor(P=P, F=F, kind=PredictorKind.TRANSIENT,
                     m=m, h=h, n_u=n_u, n_y=n_y)
    return _with_covariances(pred, H)


def _fixed_length_phi_row(phi_p_blocks: list[np.ndarray], i: int, m: int,
                          n_y: int, n_z: int) -> np.ndarray:
    """Row block i of the shifted Phi_p: zeros then phi_p_1, phi_p_2, ..."""
    row = np.zeros((n_y, m * n_z))
    for j in range(i, m + 1):  # column block j holds phi_p_{j - i + 1}
        row[:, (j - 1) * n_z : j * n_z] = phi_p_blocks[j - i]
    return row


def fit_fixed_length(H: HankelSet) -> Predictor:
    """Toeplitz-structured predictor fitted by sequential residual regressions.

    Stage 1 fits the one-step model (phi_p_1..phi_p_m, phi_u_1); stage i
    fits (phi_u_i, phi_y_{i-1}) to the i-step residual left after removing
    every previously estimated coefficient, including the shifted history
    row whose blocks vanish once the shift exceeds m.
    """
    _require_min_examples(H, PredictorKind.FIXED_LENGTH)
    m, h, n_u, n_y, n_z = H.m, H.h, H.n_u, H.n_y, H.n_z
    mnz = m * n_z

    theta = ls_fit(H.y_block(1), np.vstack([H.Z, H.u_block(1)]),
                   name="stage-1 regressor")
    phi_p_blocks = [theta[:, j * n_z : (j + 1) * n_z] for j in range(m)]
    phi_u = [theta[:, mnz:]]
    phi_y: list[np.ndarray] = []

    base = np.vstack([H.u_block(1), H.y_block(1)])
    for i in range(2, h + 1):
        resid = H.y_block(i) - _fixed_length_phi_row(phi_p_blocks, i, m, n_y, n_z) @ H.Z
        for j in range(2, i + 1):
            resid = resid - phi_u[i - j] @ H.u_block(j)
        for j in range(2, i):
            resid = resid - phi_y[i - j - 1] @ H.y_block(j)
        theta = ls_fit(resid, base, name=f"stage-{i} regressor")
        phi_u.append(theta[:, :n_u])
        phi_y.append(theta[:, n_u:])

    Phi_p = np.vstack([_fixed_length_phi_row(phi_p_blocks, i, m, n_y, n_z)
                       for i in range(1, h + 1)])
    Phi_u = np.zeros((h * n_y, h * n_u))
    Phi_y = np.zeros((h * n_y, h * n_y))
    for i in range(1, h + 1):
        for j in range(1, i + 1):
            Phi_u[(i - 1) * n_y : i * n_y, (j - 1) * n_u : j * n_u] = phi_u[i - j]
        for j in range(1, i):
            Phi_y[(i - 1) * n_y : i * n_y, (j - 1) * n_y : j * n_y] = phi_y[i - j - 1]
    phi = PhiTriple(Phi_p=Phi_p, Phi_u=Phi_u, Phi_y=Phi_y, n_u=n_u, n_y=n_y)
    P, F = phi_to_pf(phi)
    pred = Predictor(P=P, F=F, kind=PredictorKind.FIXED_LENGTH,
                     m=m, h=h, n_u=n_u, n_y=n_y)
    return _with_covariances(pred, H)


def fit_predictor(H: HankelSet, kind: PredictorKind) -> Predictor:
    """Dispatch to the fit routine for a predictor kind."""
    kind = PredictorKind(kind)
    if kind is PredictorKind.SUBSPACE:
        return fit_subspace(H)
    if kind is PredictorKind.MULTISTEP:
        return fit_multistep(H)
    if kind is PredictorKind.TRANSIENT:
        return fit_transient(H)
    if kind is PredictorKind.FIXED_LENGTH:
        return fit_fixed_length(H)
    from .statespace import fit_statespace

    pred, _ = fit_statespace(H)
    return pred


def predict(pred: Predictor, z_p: np.ndarray, u_f: np.ndarray) -> np.ndarray:
    """Predicted output trajectory P z_p + F u_f."""
    z_p = np.asarray(z_p, dtype=float)
    u_f = np.asarray(u_f, dtype=float)
    if z_p.shape[0] != pred.P.shape[1]:
        raise DimensionError(f"z_p has length {z_p.shape[0]}, expected {pred.P.shape[1]}")
    if u_f.shape[0] != pred.F.shape[1]:
        raise DimensionError(f"u_f has length {u_f.shape[0]}, expected {pred.F.shape[1]}")
    return pred.P @ z_p + pred.F @ u_f


def test_rmse(pred: Predictor, Htest: HankelSet) -> tuple[np.ndarray, float]:
    """Per-step prediction RMSE on a test Hankel set.

    Returns an (h, n_y) array of per-scalar-predictor RMSEs and their flat
    average over elements of y and steps ahead.
    """
    if (Htest.m, Htest.h, Htest.n_u, Htest.n_y) != (pred.m, pred.h, pred.n_u, pred.n_y):
        raise DimensionError("test Hankel dimensions do not match the predictor")
    E = Htest.Y - pred.P @ Htest.Z - pred.F @ Htest.U
    per_row = np.sqrt(np.mean(E * E, axis=1))
    per_step = per_row.reshape(pred.h, pred.n_y)
    return per_step, float(np.mean(per_row))


def _row_param_count(kind: PredictorKind, i: int, m: int, h: int,
                     n_u: int, n_y: int) -> int:
    """Free parameters entering the scalar regressions of block row i."""
    n_z = n_u + n_y
    if kind is PredictorKind.SUBSPACE:
        return m * n_z + h * n_u
    if kind is PredictorKind.MULTISTEP:
        return m * n_z + i * n_u
    if kind is PredictorKind.TRANSIENT:
        return m * n_z + i * n_u + (i - 1) * n_y
    if kind is PredictorKind.FIXED_LENGTH:
        return max(m - i + 1, 0) * n_z + i * n_u + (i - 1) * n_y
    return m * n_z + n_u  # state space: every row reuses the one-step fit


@dataclass(frozen=True)
class AicRecord:
    m: int
    aic: float | None
    feasible: bool
    detail: str = ""


def select_memory(
    data: TrajectoryData,
    kind: PredictorKind,
    h: int,
    candidates: Sequence[int],
) -> tuple[int, list[AicRecord]]:
    """Choose the memory m minimizing the mean per-row AIC over candidates.

    Each of the h*n_y scalar predictors contributes n*ln(RSS/n) + 2*k_row,
    weighting rows equally; ties break toward the smallest m. Infeasible
    candidates are skipped with a warning record; if all are infeasible the
    last error propagates.
    """
    kind = PredictorKind(kind)
    if not candidates:
        raise ValueError("candidates must be nonempty")
    records: list[AicRecord] = []
    best_m, best_aic = None, np.inf
    last_error: TpcError | None = None
    for m in sorted(candidates):
        try:
            H = build_hankel(data, m, h)
            pred = fit_predictor(H, kind)
        except (InsufficientDataError, RankDeficientError, DimensionError) as exc:
            records.append(AicRecord(m=m, aic=None, feasible=False, detail=str(exc)))
            log.warning("memory candidate m=%d infeasible for %s: %s", m, kind.value, exc)
            last_error = exc
            continue
        E = H.Y - pred.P @ H.Z - pred.F @ H.U
        n = H.n
        aic_rows = []
        for r in range(E.shape[0]):
            i = r // pred.n_y + 1
            rss = float(E[r] @ E[r])
            k_row = _row_param_count(kind, i, m, h, pred.n_u, pred.n_y)
            aic_rows.append(n * np.log(max(rss, 1e-300) / n) + 2.0 * k_row)
        aic = float(np.mean(aic_rows))
        records.append(AicRecord(m=m, aic=aic, feasible=True))
        if aic < best_aic:
            best_m, best_aic = m, aic
    if best_m is None:
        assert last_error is not None
        raise last_error
    return best_m, records


def error_covariance(
    pred: Predictor, H: HankelSet, subtract_params: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """One-step and trajectory error covariance estimates on a Hankel set.

    Residuals are taken over the n trajectory examples. With subtract_params
    the denominators become n - k, using the predictor's estimated parameter
    counts; n - k must stay positive.
    """
    if (Htuple := (H.m, H.h, H.n_u, H.n_y)) != (pred.m, pred.h, pred.n_u, pred.n_y):
        raise DimensionError(f"Hankel dims {Htuple} do not match predictor")
    n_y, n_u = pred.n_y, pred.n_u
    E1 = (
        H.y_block(1)
        - pred.P[:n_y] @ H.Z
        - pred.F[:n_y, :n_u] @ H.u_block(1)
    )
    E = H.Y - pred.P @ H.Z - pred.F @ H.U
    n = H.n
    from .hankel import param_count  # local import avoids a cycle at module load

    if subtract_params:
        k1 = n_y * _row_param_count(pred.kind, 1, pred.m, pred.h, n_u, n_y)
        k = param_count(pred.kind, pred.m, pred.h, n_u, n_y)
        if n - k1 <= 0 or n - k <= 0:
            raise DimensionError(
                f"degenerate denominator: n = {n} with k1 = {k1}, k = {k}"
            )
        d1, d2 = n - k1, n - k
    else:
        d1, d2 = n, n
    return (E1 @ E1.T) / d1, (E @ E.T) / d2


def save_predictor(pred: Predictor, path: str | Path) -> Path:
    """Serialize a predictor (and any attached realization) to JSON."""
    path = Path(path)
    payload = {
        "kind": pred.kind.value,
        "dims": {"m": pred.m, "h": pred.h, "n_u": pred.n_u, "n_y": pred.n_y},
        "P": pred.P.tolist(),
        "F": pred.F.tolist(),
        "onestep_error_cov": None if pred.onestep_error_cov is None
        else pred.onestep_error_cov.tolist(),
        "traj_error_cov": None if pred.traj_error_cov is None
        else pred.traj_error_cov.tolist(),
        "provenance": pred.provenance,
    }
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def load_predictor(path: str | Path) -> Predictor:
    """Load a predictor written by save_predictor."""
    payload = json.loads(Path(path).read_text())
    dims = payload["dims"]
    cov1 = payload.get("onestep_error_cov")
    cov2 = payload.get("traj_error_cov")
    return Predictor(
        P=np.array(payload["P"], dtype=float),
        F=np.array(payload["F"], dtype=float),
        kind=PredictorKind(payload["kind"]),
        m=dims["m"],
        h=dims["h"],
        n_u=dims["n_u"],
        n_y=dims["n_y"],
        onestep_error_cov=None if cov1 is None else np.array(cov1),
        traj_error_cov=None if cov2 is None else np.array(cov2),
        provenance=payload.get("provenance", {}),
    )
