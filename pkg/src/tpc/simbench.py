"""Benchmark apparatus: plant, data collection, oracle, and Monte Carlo sweeps.

The benchmark plant is a noisy double integrator tracked against a random
step reference. Training data come either from open-loop excitation or from
a proportional-derivative loop with added excitation; closed-loop test runs
compare trajectory-predictor controllers against a steady-state LQG design
built from the true plant, whose mean cost is the normalization floor.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .control import (
    QuadraticCost,
    TpcGain,
    control_delta0,
    control_relaxed,
    make_gain,
    reference_preview,
)
from .errors import DimensionError, NotConvergedError, TpcError
from .hankel import PredictorKind, TrajectoryData, build_hankel
from .predictors import fit_predictor, select_memory, test_rmse

__all__ = [
    "PlantModel",
    "double_integrator_plant",
    "ReferenceSignal",
    "RunResult",
    "LqgOracle",
    "ExperimentConfig",
    "SweepSummary",
    "derive_rng",
    "plant_step",
    "generate_reference",
    "collect_training_data",
    "design_lqg",
    "lqg_control",
    "run_closed_loop",
    "monte_carlo",
    "TpcPolicy",
    "LqgPolicy",
    "PD_GAIN",
    "EXCITATION_STD",
    "DIVERGENCE_LIMIT",
]

PD_GAIN = np.array([[0.0833, 0.7944]])
EXCITATION_STD = 0.1  # 0.01-variance excitation noise
DIVERGENCE_LIMIT = 1e6


def derive_rng(master_seed: int, *parts: int | str) -> np.random.Generator:
    """Independent generator for a (run, stream) combination.

    String tags hash to stable integers, so streams depend only on the
    master seed and the tag tuple, never on execution order or job count.
    """
    words = [int(master_seed) & 0xFFFFFFFF]
    for p in parts:
        if isinstance(p, str):
            words.append(zlib.crc32(p.encode()))
        else:
            words.append(int(p) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))


def _psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (eigenvalue clipping at 0)."""
    vals, vecs = np.linalg.eigh(np.atleast_2d(M))
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


@dataclass(frozen=True)
class PlantModel:
    """Linear plant x+ = A x + B u + w, y = C x + v with Gaussian noise."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    W: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C", "W", "V"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if self.A.shape[0] != self.A.shape[1]:
            raise DimensionError("A must be square")
        if self.B.shape[0] != self.A.shape[0] or self.C.shape[1] != self.A.shape[0]:
            raise DimensionError("B and C must conform with A")

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    def noise_sqrts(self) -> tuple[np.ndarray, np.ndarray]:
        return _psd_sqrt(self.W), _psd_sqrt(self.V)


def double_integrator_plant() -> PlantModel:
    """The benchmark plant: unit-step Euler-discretized double integrator."""
    return PlantModel(
        A=np.array([[1.0, 1.0], [0.0, 1.0]]),
        B=np.array([[0.0], [1.0]]),
        C=np.eye(2),
        W=np.diag([0.0025, 0.0001]),
        V=0.0004 * np.eye(2),
    )


def plant_step(
    plant: PlantModel, x: np.ndarray, u: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One noisy plant transition: returns (x_next, y) with fresh w, v draws."""
    w_sqrt, v_sqrt = plant.noise_sqrts()
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = v_sqrt @ rng.standard_normal(plant.n_y)
    y = plant.C @ x + v
    w = w_sqrt @ rng.standard_normal(plant.n_x)
    x_next = plant.A @ x + plant.B @ u + w
    return x_next, y


@dataclass(frozen=True)
class ReferenceSignal:
    """Piecewise-constant reference; only the first component steps."""

    values: np.ndarray  # (T, n_y)
    steps: tuple = ()  # (start_index, duration, magnitude) records

    @property
    def T(self) -> int:
        return self.values.shape[0]


def generate_reference(rng: np.random.Generator, T: int, n_y: int = 2) -> ReferenceSignal:
    """Random step reference: durations uniform on {1..50}, magnitudes on [-5, 5]."""
    if T < 1:
        raise DimensionError(f"T must be >= 1, got {T}")
    values = np.zeros((T, n_y))
    steps = []
    t = 0
    while t < T:
        dur = int(rng.integers(1, 51))
        mag = float(rng.uniform(-5.0, 5.0))
        stop = min(t + dur, T)
        values[t:stop, 0] = mag
        steps.append((t, stop - t, mag))
        t = stop
    return ReferenceSignal(values=values, steps=tuple(steps))


def collect_training_data(
    mode: str,
    d: int,
    rng: np.random.Generator,
    plant: PlantModel | None = None,
    reference: ReferenceSignal | None = None,
    pd_gain: np.ndarray = PD_GAIN,
    excitation_std: float = EXCITATION_STD,
) -> TrajectoryData:
    """Run the plant for d steps under the open- or closed-loop input policy.

    Open loop applies pure excitation noise; closed loop applies the PD
    tracking law plus excitation noise. The PD loop is strictly proper (it
    acts on the previous measurement and reference), which keeps the input
    uncorrelated with the current innovation so closed-loop identification
    stays consistent. The reference (generated from rng when omitted) only
    matters in closed loop.
    """
    if d < 1:
        raise DimensionError(f"d must be >= 1, got {d}")
    if mode not in ("open", "closed"):
        raise ValueError(f"mode must be 'open' or 'closed', got {mode!r}")
    plant = plant or double_integrator_plant()
    if mode == "closed" and reference is None:
        reference = generate_reference(rng, d, n_y=plant.n_y)
    w_sqrt, v_sqrt = plant.noise_sqrts()
    x = np.zeros(plant.n_x)
    us = np.zeros((d, plant.n_u))
    ys = np.zeros((d, plant.n_y))
    y_prev = np.zeros(plant.n_y)
    yr_prev = np.zeros(plant.n_y)
    for t in range(d):
        y = plant.C @ x + v_sqrt @ rng.standard_normal(plant.n_y)
        noise = excitation_std * rng.standard_normal(plant.n_u)
        if mode == "open":
            u = noise
        else:
            u = -pd_gain @ (y_prev - yr_prev) + noise
        x = plant.A @ x + plant.B @ u + w_sqrt @ rng.standard_normal(plant.n_x)
        us[t] = u
        ys[t] = y
        y_prev = y
        if mode == "closed":
            yr_prev = reference.values[t]
    return TrajectoryData(inputs=us, outputs=ys, label=f"{mode}-loop")


def _dare_iterate(
    A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray,
    tol: float = 1e-12, max_iter: int = 10_000, what: str = "Riccati",
) -> np.ndarray:
    """Fixed-point iteration for the discrete algebraic Riccati equation.

    Converges to relative tolerance tol in the max norm, or raises with
    iteration diagnostics.
    """
    P = Q.copy()
    for it in range(1, max_iter + 1):
        BtPB = B.T @ P @ B + R
        gain = np.linalg.solve(BtPB, B.T @ P @ A)
        Pn = Q + A.T @ P @ (A - B @ gain)
        Pn = 0.5 * (Pn + Pn.T)
        resid = float(np.max(np.abs(Pn - P)))
        scale = max(1.0, float(np.max(np.abs(Pn))))
        P = Pn
        if resid <= tol * scale:
            return P
    raise NotConvergedError(
        f"{what} iteration did not reach {tol:g} in {max_iter} iterations "
        f"(last residual {resid:.3e})",
        iterations=max_iter,
        residual=resid,
    )


@dataclass
class LqgOracle:
    """Steady-state LQR gain plus steady-state Kalman filter with state x̂.

    The tracking target sets the first state to the first reference
    component and the rest to zero, which is an exact equilibrium for the
    benchmark plant (A x_ss = x_ss, u_ss = 0).
    """

    K_lqr: np.ndarray
    L_kf: np.ndarray
    plant: PlantModel
    xhat: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.xhat is None:
            self.xhat = np.zeros(self.plant.n_x)

    def reset(self) -> None:
        self.xhat = np.zeros(self.plant.n_x)


def design_lqg(plant: PlantModel, Qy: np.ndarray, Ru: np.ndarray) -> LqgOracle:
    """Certainty-equivalence LQG design from the true plant and noise model.

    The state weight is C' Qy C (the output cost transferred to the state);
    both Riccati equations are solved by fixed-point iteration.
    """
    Qy = np.atleast_2d(np.asarray(Qy, dtype=float))
    Ru = np.atleast_2d(np.asarray(Ru, dtype=float))
    Qx = plant.C.T @ Qy @ plant.C
    P = _dare_iterate(plant.A, plant.B, Qx, Ru, what="control Riccati")
    K_lqr = np.linalg.solve(plant.B.T @ P @ plant.B + Ru, plant.B.T @ P @ plant.A)
    S = _dare_iterate(plant.A.T, plant.C.T, plant.W, plant.V, what="filter Riccati")
    L_kf = S @ plant.C.T @ np.linalg.inv(plant.C @ S @ plant.C.T + plant.V)
    return LqgOracle(K_lqr=K_lqr, L_kf=L_kf, plant=plant)


def lqg_control(oracle: LqgOracle, y: np.ndarray, y_r: np.ndarray) -> np.ndarray:
    """Kalman measurement update, control move, then time update.

    y_r is the last observed reference, so the oracle works from the same
    reference information as the persistence preview. Mutates the oracle's
    internal state estimate; call reset() between runs.
    """
    plant = oracle.plant
    xhat = oracle.xhat + oracle.L_kf @ (y - plant.C @ oracle.xhat)
    x_ss = np.zeros(plant.n_x)
    x_ss[0] = y_r[0]
    u = -(oracle.K_lqr @ (xhat - x_ss))
    oracle.xhat = plant.A @ xhat + plant.B @ u
    return u


class TpcPolicy:
    """Receding-horizon policy from a precomputed trajectory-predictor gain.

    Plans against the persistence reference preview built from the last
    observed reference and applies the first planned input block.
    """

    def __init__(self, gain: TpcGain, tag: str = "tpc"):
        self.gain = gain
        self.tag = tag
        self.memory = gain.P.shape[1] // (gain.n_u + gain.n_y)

    def reset(self) -> None:
        pass

    def act(self, y, y_r, y_r_prev, z_p, rng) -> np.ndarray:
        yrf = reference_preview(y_r_prev, self.gain.h)
        if self.gain.mode == "delta0":
            u_f = control_delta0(self.gain, z_p, yrf)
        else:
            u_f, _ = control_relaxed(self.gain, z_p, yrf)
        return u_f[: self.gain.n_u]


class LqgPolicy:
    """Oracle LQG policy; needs no input/output history."""

    memory = 0

    def __init__(self, oracle: LqgOracle, tag: str = "lqg"):
        self.oracle = oracle
        self.tag = tag

    def reset(self) -> None:
        self.oracle.reset()

    def act(self, y, y_r, y_r_prev, z_p, rng) -> np.ndarray:
        return lqg_control(self.oracle, y, y_r_prev)


@dataclass(frozen=True)
class RunResult:
    """Closed-loop trajectories and realized cost from one simulation."""

    u: np.ndarray
    y: np.ndarray
    y_r: np.ndarray
    per_step_cost: np.ndarray
    cost: float
    controller: str
    seed: int | None = None
    diverged: bool = False

    @property
    def mean_abs_u(self) -> float:
        return float(np.mean(np.abs(self.u)))


def run_closed_loop(
    policy,
    plant: PlantModel,
    reference: ReferenceSignal,
    T: int,
    cost: QuadraticCost,
    rng: np.random.Generator,
    warmup: int | None = None,
    noise: tuple[np.ndarray, np.ndarray] | None = None,
    pd_gain: np.ndarray = PD_GAIN,
    excitation_std: float = EXCITATION_STD,
    seed: int | None = None,
    divergence_limit: float = DIVERGENCE_LIMIT,
) -> RunResult:
    """Simulate a policy for T steps after a PD warmup that fills its history.

    The warmup regulates around a zero reference for `warmup` steps (the
    policy's memory by default) to populate z_p; references start fresh at
    t = 1. Pre-drawn (w, v) arrays may be supplied for common-random-number
    pairing across controllers; warmup noise always comes from rng. A run is
    flagged diverged and truncated once any |y| exceeds divergence_limit.
    """
    if reference.T < T:
        raise DimensionError(f"reference covers {reference.T} steps, need {T}")
    if warmup is None:
        warmup = policy.memory
    w_sqrt, v_sqrt = plant.noise_sqrts()
    policy.reset()
    x = np.zeros(plant.n_x)
    hist_u: list[np.ndarray] = []
    hist_y: list[np.ndarray] = []
    y_prev = np.zeros(plant.n_y)
    for _ in range(warmup):
        y = plant.C @ x + v_sqrt @ rng.standard_normal(plant.n_y)
        u = -pd_gain @ y_prev + excitation_std * rng.standard_normal(plant.n_u)
        x = plant.A @ x + plant.B @ u + w_sqrt @ rng.standard_normal(plant.n_x)
        hist_u.append(u)
        hist_y.append(y)
        y_prev = y

    if noise is not None:
        w_arr, v_arr = noise
        if w_arr.shape[0] < T or v_arr.shape[0] < T:
            raise DimensionError("pre-drawn noise arrays must cover T steps")
    else:
        w_arr = rng.standard_normal((T, plant.n_x)) @ w_sqrt.T
        v_arr = rng.standard_normal((T, plant.n_y)) @ v_sqrt.T

    Qy, Ru = cost.Qy, cost.Ru
    us = np.zeros((T, plant.n_u))
    ys = np.zeros((T, plant.n_y))
    per_step = np.zeros(T)
    y_r_prev = np.zeros(plant.n_y)
    diverged = False
    steps_done = 0
    memory = policy.memory
    for t in range(T):
        y = plant.C @ x + v_arr[t]
        if np.max(np.abs(y)) > divergence_limit:
            diverged = True
            break
        y_r = reference.values[t]
        if memory > 0:
            z_p = np.concatenate(
                [np.concatenate([hu, hy]) for hu, hy in
                 zip(hist_u[-memory:], hist_y[-memory:])]
            )
        else:
            z_p = None
        u = np.atleast_1d(policy.act(y, y_r, y_r_prev, z_p, rng))
        e = y - y_r
        per_step[t] = float(e @ Qy @ e + u @ Ru @ u)
        x = plant.A @ x + plant.B @ u + w_arr[t]
        us[t] = u
        ys[t] = y
        if memory > 0:
            hist_u.append(u)
            hist_y.append(y)
            if len(hist_u) > memory:
                del hist_u[:-memory], hist_y[:-memory]
        y_r_prev = y_r
        steps_done = t + 1
    sl = slice(0, steps_done)
    return RunResult(
        u=us[sl],
        y=ys[sl],
        y_r=reference.values[sl].copy(),
        per_step_cost=per_step[sl],
        cost=float(np.sum(per_step[sl])),
        controller=getattr(policy, "tag", type(policy).__name__),
        seed=seed,
        diverged=diverged,
    )


# --------------------------------------------------------------------------
# Monte Carlo sweep
# --------------------------------------------------------------------------

_KIND_NAMES = [k.value for k in PredictorKind]


@dataclass
class ExperimentConfig:
    """Configuration of a Monte Carlo sweep; serializes to/from JSON."""

    d_values: list[int] = field(default_factory=lambda: [30, 100, 500])
    training_modes: list[str] = field(default_factory=lambda: ["open", "closed"])
    predictors: list[str] = field(default_factory=lambda: list(_KIND_NAMES))
    h: int = 10
    m_candidates: list[int] = field(default_factory=lambda: [1, 2, 3])
    runs: int = 200
    T_test: int = 400
    # RMSE test-set length; None sizes each set to d + h so the prediction
    # anchors span a d-sample range with a complete fresh horizon after each
    d_test: int | None = None
    # references stay within [-5, 5]; an output three times beyond that bound
    # is unreachable under any adequate controller of the benchmark plant, so
    # crossing it marks the run unstable (excluded from means, counted)
    divergence_limit: float = 15.0
    lambda_: float | None = None
    master_seed: int = 0
    save_runs: bool = False
    Qy: list = field(default_factory=lambda: [[1000.0, 0.0], [0.0, 10.0]])
    Ru: list = field(default_factory=lambda: [[1.0]])
    plant: dict | None = None  # overrides the double integrator when given

    def __post_init__(self):
        for kind in self.predictors:
            PredictorKind(kind)  # raises on unknown names
        for mode in self.training_modes:
            if mode not in ("open", "closed"):
                raise ValueError(f"unknown training mode {mode!r}")
        if self.runs < 1 or self.T_test < 1 or not self.d_values:
            raise ValueError("runs, T_test, and d_values must be positive")

    def make_plant(self) -> PlantModel:
        if self.plant is None:
            return double_integrator_plant()
        p = self.plant
        return PlantModel(A=np.array(p["A"]), B=np.array(p["B"]), C=np.array(p["C"]),
                          W=np.array(p["W"]), V=np.array(p["V"]))

    def make_cost(self) -> QuadraticCost:
        return QuadraticCost(Qy=np.array(self.Qy), Ru=np.array(self.Ru), h=self.h)

    def controllers(self) -> list[str]:
        return ["delta0", "relaxed"] if self.lambda_ is not None else ["delta0"]

    def to_json(self) -> str:
        payload = asdict(self)
        payload["lambda"] = payload.pop("lambda_")
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        payload = json.loads(text)
        if "lambda" in payload:
            payload["lambda_"] = payload.pop("lambda")
        return cls(**payload)


def _cell_key(kind: str, mode: str, d: int, controller: str) -> tuple:
    return (kind, mode, d, controller)


def _run_one(config: ExperimentConfig, r: int, out_dir: str | None) -> dict:
    """Worker for one Monte Carlo run; every stream derives from (seed, r, tag)."""
    plant = config.make_plant()
    cost = config.make_cost()
    seed = config.master_seed
    h = config.h

    train = {}
    for mode in config.training_modes:
        for d in config.d_values:
            rng = derive_rng(seed, r, "train", mode, d)
            train[(mode, d)] = collect_training_data(mode, d, rng, plant=plant)
    test_sets: dict[tuple[str, int], TrajectoryData] = {}
    for tmode in ("open", "closed"):
        for d in config.d_values:
            d_test = config.d_test or (d + h)
            if (tmode, d_test) not in test_sets:
                test_sets[(tmode, d_test)] = collect_training_data(
                    tmode, d_test, derive_rng(seed, r, "test", tmode, d_test), plant=plant
                )
    test_hankels: dict[tuple[str, int, int], object] = {}

    reference = generate_reference(derive_rng(seed, r, "ctrl-ref"), config.T_test, n_y=plant.n_y)
    w_sqrt, v_sqrt = plant.noise_sqrts()
    noise_rng = derive_rng(seed, r, "ctrl-noise")
    w_arr = noise_rng.standard_normal((config.T_test, plant.n_x)) @ w_sqrt.T
    v_arr = noise_rng.standard_normal((config.T_test, plant.n_y)) @ v_sqrt.T
    noise = (w_arr, v_arr)

    oracle = design_lqg(plant, cost.Qy, cost.Ru)
    lqg_result = run_closed_loop(
        LqgPolicy(oracle), plant, reference, config.T_test, cost,
        rng=derive_rng(seed, r, "warmup", "lqg"), noise=noise, seed=r,
        divergence_limit=config.divergence_limit,
    )

    cells = {}
    run_files = []
    for mode in config.training_modes:
        for d in config.d_values:
            data = train[(mode, d)]
            for kind_name in config.predictors:
                kind = PredictorKind(kind_name)
                base = {
                    "cost": math.nan, "rmse_open": math.nan, "rmse_closed": math.nan,
                    "mean_abs_u": math.nan, "m": None, "diverged": False, "failure": None,
                }
                record = {c: dict(base) for c in config.controllers()}
                try:
                    m_best, _ = select_memory(data, kind, h, config.m_candidates)
                    H = build_hankel(data, m_best, h)
                    pred = fit_predictor(H, kind)
                    rmses = {}
                    d_test = config.d_test or (d + h)
                    for tmode in ("open", "closed"):
                        key = (tmode, d_test, m_best)
                        if key not in test_hankels:
                            test_hankels[key] = build_hankel(
                                test_sets[(tmode, d_test)], m_best, h
                            )
                        rmses[tmode] = test_rmse(pred, test_hankels[key])[1]
                    for controller in config.controllers():
                        if controller == "delta0":
                            gain = make_gain(pred, cost, "delta0")
                        else:
                            gain = make_gain(pred, cost, "relaxed", lam=config.lambda_)
                        policy = TpcPolicy(gain, tag=f"{kind_name}/{controller}")
                        result = run_closed_loop(
                            policy, plant, reference, config.T_test, cost,
                            rng=derive_rng(seed, r, "warmup", mode, d, kind_name, controller),
                            noise=noise, seed=r,
                            divergence_limit=config.divergence_limit,
                        )
                        rec = record[controller]
                        # diverged runs were aborted early: their partial cost
                        # is not comparable to completed runs, so the means
                        # skip them and diverged_count carries the evidence
                        rec.update(
                            cost=math.nan if result.diverged else result.cost,
                            rmse_open=rmses["open"],
                            rmse_closed=rmses["closed"],
                            mean_abs_u=math.nan if result.diverged else result.mean_abs_u,
                            m=m_best, diverged=result.diverged,
                        )
                        if config.save_runs and out_dir is not None:
                            fname = f"{kind_name}_{mode}_d{d}_{controller}_run{r}.csv"
                            _write_run_csv(Path(out_dir) / "runs" / fname, result)
                            run_files.append(fname)
                except TpcError as exc:
                    for rec in record.values():
                        rec["failure"] = f"{type(exc).__name__}: {exc}"
                for controller, rec in record.items():
                    cells[_cell_key(kind_name, mode, d, controller)] = rec
    return {"run": r, "cells": cells, "lqg_cost": lqg_result.cost, "run_files": run_files}


def _write_run_csv(path: Path, result: RunResult) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    n_u, n_y = result.u.shape[1], result.y.shape[1]
    header = (
        ["t"]
        + [f"u_{i + 1}" for i in range(n_u)]
        + [f"y_{i + 1}" for i in range(n_y)]
        + [f"yr_{i + 1}" for i in range(n_y)]
        + ["cost"]
    )
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for t in range(result.u.shape[0]):
            row = [str(t + 1)]
            row += [f"{v:.17g}" for v in result.u[t]]
            row += [f"{v:.17g}" for v in result.y[t]]
            row += [f"{v:.17g}" for v in result.y_r[t]]
            row.append(f"{result.per_step_cost[t]:.17g}")
            writer.writerow(row)


SUMMARY_COLUMNS = [
    "kind", "train_mode", "d", "controller", "runs", "failures", "diverged_count",
    "mean_rmse_open_test", "stderr_rmse_open_test",
    "mean_rmse_closed_test", "stderr_rmse_closed_test",
    "mean_cost", "stderr_cost", "cost_ratio_vs_lqg",
    "mean_abs_u", "stderr_abs_u", "mean_m_selected", "lqg_mean_cost",
]


@dataclass
class CellResult:
    """Per-run metric arrays for one (kind, mode, d, controller) cell."""

    cost: np.ndarray
    rmse_open: np.ndarray
    rmse_closed: np.ndarray
    mean_abs_u: np.ndarray
    m_selected: np.ndarray
    diverged: np.ndarray
    failures: list[str]

    @property
    def n_ok(self) -> int:
        return int(np.sum(~np.isnan(self.cost)))


def _nanmean(x: np.ndarray) -> float:
    return float(np.nanmean(x)) if np.any(~np.isnan(x)) else math.nan


def _nanstderr(x: np.ndarray) -> float:
    ok = x[~np.isnan(x)]
    if ok.size < 2:
        return math.nan
    return float(np.std(ok, ddof=1) / np.sqrt(ok.size))


@dataclass
class SweepSummary:
    """Aggregated Monte Carlo results plus the per-run arrays behind them."""

    config: ExperimentConfig
    cells: dict[tuple, CellResult]
    lqg_cost: np.ndarray

    @property
    def lqg_mean_cost(self) -> float:
        return float(np.mean(self.lqg_cost))

    def cell(self, kind: str, mode: str, d: int, controller: str = "delta0") -> CellResult:
        return self.cells[_cell_key(kind, mode, d, controller)]

    def row(self, key: tuple) -> dict:
        kind, mode, d, controller = key
        c = self.cells[key]
        mean_cost = _nanmean(c.cost)
        return {
            "kind": kind, "train_mode": mode, "d": d, "controller": controller,
            "runs": len(c.cost), "failures": len(c.failures),
            "diverged_count": int(np.sum(c.diverged)),
            "mean_rmse_open_test": _nanmean(c.rmse_open),
            "stderr_rmse_open_test": _nanstderr(c.rmse_open),
            "mean_rmse_closed_test": _nanmean(c.rmse_closed),
            "stderr_rmse_closed_test": _nanstderr(c.rmse_closed),
            "mean_cost": mean_cost,
            "stderr_cost": _nanstderr(c.cost),
            "cost_ratio_vs_lqg": mean_cost / self.lqg_mean_cost,
            "mean_abs_u": _nanmean(c.mean_abs_u),
            "stderr_abs_u": _nanstderr(c.mean_abs_u),
            "mean_m_selected": _nanmean(c.m_selected),
            "lqg_mean_cost": self.lqg_mean_cost,
        }

    def rows(self) -> list[dict]:
        return [self.row(key) for key in sorted(self.cells)]

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS)
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v)
                                 for k, v in row.items()})
        return path


def monte_carlo(
    config: ExperimentConfig,
    jobs: int = 1,
    out_dir: str | Path | None = None,
    progress=None,
) -> SweepSummary:
    """Run the full sweep: identify, evaluate, and control for every cell.

    Runs are independent and reproducible from (master_seed, run index), so
    the summary does not depend on the job count. Per-run failures (for
    example, a predictor kind whose minimum data requirement exceeds d) are
    recorded per cell, never fatal.
    """
    out = str(out_dir) if out_dir is not None else None
    runs = config.runs
    results: list[dict | None] = [None] * runs
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_one, config, r, out): r for r in range(runs)}
            for fut, r in futures.items():
                results[r] = fut.result()
                if progress:
                    progress(r)
    else:
        for r in range(runs):
            results[r] = _run_one(config, r, out)
            if progress:
                progress(r)

    keys = [
        _cell_key(kind, mode, d, controller)
        for kind in config.predictors
        for mode in config.training_modes
        for d in config.d_values
        for controller in config.controllers()
    ]
    cells = {}
    for key in keys:
        cost = np.full(runs, math.nan)
        rmse_o = np.full(runs, math.nan)
        rmse_c = np.full(runs, math.nan)
        mau = np.full(runs, math.nan)
        msel = np.full(runs, math.nan)
        div = np.zeros(runs, dtype=bool)
        failures = []
        for r in range(runs):
            rec = results[r]["cells"][key]
            if rec["failure"] is not None:
                failures.append(f"run {r}: {rec['failure']}")
                continue
            cost[r] = rec["cost"]
            rmse_o[r] = rec["rmse_open"]
            rmse_c[r] = rec["rmse_closed"]
            mau[r] = rec["mean_abs_u"]
            msel[r] = rec["m"]
            div[r] = rec["diverged"]
        cells[key] = CellResult(cost=cost, rmse_open=rmse_o, rmse_closed=rmse_c,
                                mean_abs_u=mau, m_selected=msel, diverged=div,
                                failures=failures)
    lqg = np.array([results[r]["lqg_cost"] for r in range(runs)])
    return SweepSummary(config=config, cells=cells, lqg_cost=lqg)
