"""Self-contained numerical verification suites with independent oracles.

Each check re-derives its expected answer by a route disjoint from the
implementation under test: masked normal equations for the causalized
least squares, dynamic elimination of the state-space model for the control
law, and direct forward simulation for the predictor/realization identity.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .control import QuadraticCost, control_delta0, make_gain
from .hankel import PredictorKind, TrajectoryData, build_hankel, min_examples
from .predictors import Predictor, fit_multistep, fit_subspace, fit_subspace_lq, phi_to_pf
from .simbench import collect_training_data, derive_rng
from .statespace import (
    InnovationsModel,
    assemble_system,
    build_phi,
    fit_statespace,
    verify_theorem3,
)

__all__ = [
    "CheckResult",
    "masked_multistep_oracle",
    "mpc_elimination_control",
    "random_hankel",
    "check_subspace_equivalence",
    "check_multistep_optimality",
    "check_theorem3",
    "check_corollary4",
    "run_all_checks",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    trials: int
    tol: float
    max_deviation: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def random_hankel(rng: np.random.Generator, m: int, h: int, n_u: int, n_y: int,
                  extra: int = 0):
    """Hankel set built from i.i.d. Gaussian data; persistently exciting a.s.

    With extra = 0 the raw length sits exactly at the subspace/multistep
    minimum, so the stacked regressor is square.
    """
    d = min_examples(PredictorKind.MULTISTEP, m, h, n_u, n_y) + extra
    data = TrajectoryData(
        inputs=rng.standard_normal((d, n_u)),
        outputs=rng.standard_normal((d, n_y)),
    )
    return build_hankel(data, m, h)


def masked_multistep_oracle(H) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force solution of the causality-constrained least squares.

    The Frobenius objective decouples over scalar rows of Y; the block
    lower triangular constraint just truncates each row's input regressors.
    Solved row by row through the normal equations, independently of any
    LQ factorization.
    """
    m, h, n_u, n_y = H.m, H.h, H.n_u, H.n_y
    mnz = m * H.n_z
    P = np.zeros((h * n_y, mnz))
    F = np.zeros((h * n_y, h * n_u))
    for row in range(h * n_y):
        i = row // n_y + 1  # block row, 1-based
        X = np.vstack([H.Z, H.U[: i * n_u]])
        theta = np.linalg.solve(X @ X.T, X @ H.Y[row])
        P[row] = theta[:mnz]
        F[row, : i * n_u] = theta[mnz:]
    return P, F


def mpc_elimination_control(
    model: InnovationsModel, h: int, cost: QuadraticCost,
    z_p: np.ndarray, yrf: np.ndarray,
) -> np.ndarray:
    """Optimal input by eliminating the noiseless state-space dynamics.

    Propagates x(i+1) = A x(i) + B u(i), y(i) = C x(i) + D u(i) from
    x(1) = z_p into y_f = O z_p + T u_f, then minimizes the quadratic cost
    in u_f directly. Uses the raw (A, B), never the innovations form.
    """
    A, B, C, D = model.A, model.B, model.C, model.D
    n_y, n_u = model.n_y, model.n_u
    nx = A.shape[0]
    O = np.zeros((h * n_y, nx))
    T = np.zeros((h * n_y, h * n_u))
    Ai = np.eye(nx)
    powers = [Ai]
    for _ in range(h - 1):
        Ai = A @ Ai
        powers.append(Ai)
    for i in range(h):
        O[i * n_y : (i + 1) * n_y] = C @ powers[i]
        T[i * n_y : (i + 1) * n_y, i * n_u : (i + 1) * n_u] = D
        for j in range(i):
            T[i * n_y : (i + 1) * n_y, j * n_u : (j + 1) * n_u] = C @ powers[i - j - 1] @ B
    Q, R = cost.Q, cost.R
    lhs = T.T @ Q @ T + R
    rhs = T.T @ Q @ (O @ z_p - yrf)
    return -np.linalg.solve(lhs, rhs)


def _rel_dev(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1.0)
    return float(np.linalg.norm(a - b) / scale)


def check_subspace_equivalence(trials: int = 100, tol: float = 1e-8,
                               seed: int = 1) -> CheckResult:
    """Pseudoinverse and LQ routes to the subspace predictor must agree."""
    rng = derive_rng(seed, "subspace-equiv")
    max_dev = 0.0
    for _ in range(trials):
        m = int(rng.integers(1, 5))
        h = int(rng.integers(1, 7))
        n_u = int(rng.integers(1, 3))
        n_y = int(rng.integers(1, 3))
        H = random_hankel(rng, m, h, n_u, n_y, extra=int(rng.integers(5, 40)))
        a = fit_subspace(H)
        b = fit_subspace_lq(H)
        max_dev = max(max_dev, _rel_dev(a.P, b.P), _rel_dev(a.F, b.F))
    return CheckResult("subspace_lq_equivalence", trials, tol, max_dev, max_dev <= tol)


def check_multistep_optimality(trials: int = 50, tol: float = 1e-7,
                               seed: int = 2) -> CheckResult:
    """Causalized LQ fit must match the masked normal-equations oracle."""
    rng = derive_rng(seed, "multistep-oracle")
    max_dev = 0.0
    for _ in range(trials):
        m = int(rng.integers(1, 4))
        h = int(rng.integers(2, 7))
        n_u = int(rng.integers(1, 3))
        n_y = int(rng.integers(1, 3))
        H = random_hankel(rng, m, h, n_u, n_y, extra=int(rng.integers(5, 40)))
        fitted = fit_multistep(H)
        P_ref, F_ref = masked_multistep_oracle(H)
        max_dev = max(max_dev, _rel_dev(fitted.P, P_ref), _rel_dev(fitted.F, F_ref))
    return CheckResult("multistep_constrained_ls", trials, tol, max_dev, max_dev <= tol)


def _benchmark_statespace(seed: int = 3, d: int = 300, m: int = 2, h: int = 10):
    data = collect_training_data("closed", d, derive_rng(seed, "thm3-data"))
    H = build_hankel(data, m, h)
    return fit_statespace(H)


def check_theorem3(trials: int = 1000, tol: float = 1e-9, seed: int = 3) -> CheckResult:
    """Predictor output must equal the h-step realization simulation."""
    pred, model = _benchmark_statespace(seed=seed)
    report = verify_theorem3(model, pred, trials=trials, tol=tol,
                             rng=derive_rng(seed, "thm3-draws"))
    return CheckResult("theorem3_equivalence", trials, tol,
                       report.max_deviation, report.passed)


def check_corollary4(trials: int = 50, tol: float = 1e-8, seed: int = 4) -> CheckResult:
    """Closed-form control law must match the eliminated state-space program."""
    rng = derive_rng(seed, "corollary4")
    max_dev = 0.0
    for _ in range(trials):
        m = int(rng.integers(1, 4))
        h = int(rng.integers(2, 9))
        n_u = int(rng.integers(1, 3))
        n_y = int(rng.integers(1, 3))
        n_z = n_u + n_y
        C = rng.standard_normal((n_y, m * n_z)) * (0.5 / np.sqrt(m * n_z))
        D = rng.standard_normal((n_y, n_u)) * 0.5
        model = assemble_system(C, D, m, n_u, n_y)
        P, F = phi_to_pf(build_phi(model, h))
        pred = Predictor(P=P, F=F, kind=PredictorKind.STATE_SPACE,
                         m=m, h=h, n_u=n_u, n_y=n_y)
        Qy = np.diag(rng.uniform(0.5, 10.0, n_y))
        Ru = np.diag(rng.uniform(0.5, 2.0, n_u))
        cost = QuadraticCost(Qy=Qy, Ru=Ru, h=h)
        gain = make_gain(pred, cost, "delta0")
        z_p = rng.standard_normal(m * n_z)
        yrf = rng.standard_normal(h * n_y)
        u_tpc = control_delta0(gain, z_p, yrf)
        u_mpc = mpc_elimination_control(model, h, cost, z_p, yrf)
        max_dev = max(max_dev, _rel_dev(u_tpc, u_mpc))
    return CheckResult("corollary4_mpc_equivalence", trials, tol, max_dev, max_dev <= tol)


def run_all_checks(trials: int | None = None, tol: float | None = None,
                   seed: int = 7) -> dict:
    """Run every suite; per-check trial counts unless one override is given."""
    if trials is not None and trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    checks = [
        check_subspace_equivalence(trials or 100, tol or 1e-8, seed),
        check_multistep_optimality(trials or 50, tol or 1e-7, seed + 1),
        check_theorem3(trials or 1000, tol or 1e-9, seed + 2),
        check_corollary4(trials or 50, tol or 1e-8, seed + 3),
    ]
    return {
        "passed": all(c.passed for c in checks),
        "checks": [c.to_dict() for c in checks],
    }
