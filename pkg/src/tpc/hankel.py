"""Training data containers, Hankel-style data matrices, and predictor sizing.

Time series are stored row-per-step: ``inputs[t]`` is u(t+1) in the 1-based
indexing used throughout (arrays are 0-based, formulas 1-based). The combined
sample z(t) = (u(t), y(t)) interleaves input above output, and the history
vector z_p(t) stacks z(t-m), ..., z(t-1) oldest first. All downstream fits
rely on this ordering and never reorder it.
"""

from __future__ import annotations

import csv
import enum
import json
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, InsufficientDataError

__all__ = [
    "TrajectoryData",
    "HankelSet",
    "PredictorKind",
    "build_hankel",
    "min_examples",
    "param_count",
    "has_full_row_rank",
    "save_trajectory",
    "load_trajectory",
]

DEFAULT_RANK_TOL = 1e-10


class PredictorKind(str, enum.Enum):
    SUBSPACE = "subspace"
    MULTISTEP = "multistep"
    TRANSIENT = "transient"
    FIXED_LENGTH = "fixed_length"
    STATE_SPACE = "state_space"


@dataclass(frozen=True)
class TrajectoryData:
    """One experiment run: d input vectors and d output vectors.

    Args:
        inputs: array of shape (d, n_u).
        outputs: array of shape (d, n_y).
        label: provenance tag, "open-loop" or "closed-loop".
    """

    inputs: np.ndarray
    outputs: np.ndarray
    label: str = "open-loop"

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_2d(np.asarray(self.outputs, dtype=float))
        if u.ndim != 2 or y.ndim != 2:
            raise DimensionError("inputs and outputs must be 2-D (d, dim) arrays")
        if u.shape[0] != y.shape[0]:
            raise DimensionError(
                f"inputs and outputs must have equal length, got {u.shape[0]} and {y.shape[0]}"
            )
        if u.shape[0] < 1:
            raise InsufficientDataError("need at least one sample", minimum=1)
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    @property
    def d(self) -> int:
        return self.inputs.shape[0]

    @property
    def n_u(self) -> int:
        return self.inputs.shape[1]

    @property
    def n_y(self) -> int:
        return self.outputs.shape[1]

    @property
    def n_z(self) -> int:
        return self.n_u + self.n_y

    def z(self) -> np.ndarray:
        """Combined samples z(t) = (u(t), y(t)) as a (d, n_z) array."""
        return np.hstack([self.inputs, self.outputs])

    def sha256(self) -> str:
        h = hashlib.sha256()
        h.update(self.inputs.tobytes())
        h.update(self.outputs.tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class HankelSet:
    """Stacked data matrices for memory m and horizon h.

    Z, U, Y hold n = d - m - h + 1 columns; column j (0-based) anchors at
    time t = m + 1 + j, i.e. Z[:, j] = z_p(t), U[:, j] = u_f(t), Y[:, j] =
    y_f(t). The one-step set Z1, U1, Y1 extends through time d and holds
    n1 = d - m columns for the one-step-ahead fit.
    """

    Z: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    Z1: np.ndarray
    U1: np.ndarray
    Y1: np.ndarray
    m: int
    h: int
    n_u: int
    n_y: int

    @property
    def n_z(self) -> int:
        return self.n_u + self.n_y

    @property
    def n(self) -> int:
        return self.Z.shape[1]

    @property
    def n1(self) -> int:
        return self.Z1.shape[1]

    def u_blocks(self, stop: int) -> np.ndarray:
        """Block rows 1..stop of U, shape (stop * n_u, n)."""
        return self.U[: stop * self.n_u]

    def y_blocks(self, stop: int) -> np.ndarray:
        """Block rows 1..stop of Y, shape (stop * n_y, n)."""
        return self.Y[: stop * self.n_y]

    def u_block(self, i: int) -> np.ndarray:
        """Block row i (1-based) of U."""
        return self.U[(i - 1) * self.n_u : i * self.n_u]

    def y_block(self, i: int) -> np.ndarray:
        """Block row i (1-based) of Y."""
        return self.Y[(i - 1) * self.n_y : i * self.n_y]


def _windows(series: np.ndarray, length: int, starts: int) -> np.ndarray:
    """Stack `starts` sliding windows of `length` rows as columns.

    Column j is series[j : j + length] flattened row-major, so consecutive
    time steps stay contiguous inside each column.
    """
    w = sliding_window_view(series, length, axis=0)  # (d - length + 1, dim, length)
    cols = w.transpose(0, 2, 1).reshape(w.shape[0], length * series.shape[1])
    return np.ascontiguousarray(cols[:starts].T)


def build_hankel(data: TrajectoryData, m: int, h: int) -> HankelSet:
    """Build the stacked data matrices for memory m and horizon h.

    Requires d >= m + h so that n = d - m - h + 1 >= 1.
    """
    if m < 1 or h < 1:
        raise DimensionError(f"m and h must be positive, got m={m}, h={h}")
    d = data.d
    if d < m + h:
        raise InsufficientDataError(
            f"need at least d = m + h = {m + h} samples to build the h-step "
            f"matrices, got d = {d}",
            minimum=m + h,
        )
    z = data.z()
    n = d - m - h + 1
    n1 = d - m
    Z = _windows(z, m, n)
    U = _windows(data.inputs[m:], h, n)
    Y = _windows(data.outputs[m:], h, n)
    Z1 = _windows(z, m, n1)
    U1 = np.ascontiguousarray(data.inputs[m:].T)
    Y1 = np.ascontiguousarray(data.outputs[m:].T)
    return HankelSet(Z=Z, U=U, Y=Y, Z1=Z1, U1=U1, Y1=Y1, m=m, h=h, n_u=data.n_u, n_y=data.n_y)


def min_examples(kind: PredictorKind, m: int, h: int, n_u: int, n_y: int) -> int:
    """Minimum number of raw samples d needed to fit a predictor.

    Values are the smallest d for which every regressor in the fit has at
    least as many columns as rows, so its pseudoinverse is well defined.
    """
    if min(m, h, n_u, n_y) < 1:
        raise DimensionError("all dimensions must be >= 1")
    n_z = n_u + n_y
    kind = PredictorKind(kind)
    if kind is PredictorKind.TRANSIENT:
        return (n_z + 1) * (m + h) - n_y - 1
    if kind in (PredictorKind.SUBSPACE, PredictorKind.MULTISTEP):
        return (n_z + 1) * m + (n_u + 1) * h - 1
    if kind is PredictorKind.FIXED_LENGTH:
        return (n_z + 1) * m + h + n_u - 1
    return (n_z + 1) * m + n_u  # state space


def param_count(kind: PredictorKind, m: int, h: int, n_u: int, n_y: int) -> int:
    """Number of free entries actually estimated for a predictor kind."""
    if min(m, h, n_u, n_y) < 1:
        raise DimensionError("all dimensions must be >= 1")
    n_z = n_u + n_y
    kind = PredictorKind(kind)
    if kind is PredictorKind.SUBSPACE:
        return h * n_y * (m * n_z + h * n_u)
    if kind is PredictorKind.MULTISTEP:
        return h * n_y * m * n_z + n_y * n_u * h * (h + 1) // 2
    if kind is PredictorKind.TRANSIENT:
        return (
            h * n_y * m * n_z
            + n_y * n_u * h * (h + 1) // 2
            + n_y * n_y * h * (h - 1) // 2
        )
    if kind is PredictorKind.FIXED_LENGTH:
        return n_y * n_z * m + n_y * n_u * h + n_y * n_y * (h - 1)
    return n_y * (m * n_z + n_u)  # state space


def has_full_row_rank(M: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> bool:
    """True iff M has full row rank numerically.

    A matrix with more rows than columns can never qualify; otherwise the
    test is sigma_min > tol * sigma_max.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    if rows > cols:
        return False
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s[-1] > tol * s[0])


def numerical_rank(M: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above tol * sigma_max."""
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def save_trajectory(data: TrajectoryData, path: str | Path, seed: int | None = None) -> Path:
    """Write a trajectory as CSV plus a JSON metadata sidecar.

    The CSV has header t,u_1..u_nu,y_1..y_ny and one row per time step with
    full double precision. The sidecar <path>.json records dimensions, the
    provenance label, and an optional RNG seed.
    """
    path = Path(path)
    header = (
        ["t"]
        + [f"u_{i + 1}" for i in range(data.n_u)]
        + [f"y_{i + 1}" for i in range(data.n_y)]
    )
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for t in range(data.d):
            row = [str(t + 1)]
            row += [f"{v:.17g}" for v in data.inputs[t]]
            row += [f"{v:.17g}" for v in data.outputs[t]]
            writer.writerow(row)
    meta = {
        "d": data.d,
        "n_u": data.n_u,
        "n_y": data.n_y,
        "label": data.label,
        "seed": seed,
        "sha256": data.sha256(),
    }
    meta_path = path.with_suffix(path.suffix + ".json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_trajectory(path: str | Path) -> TrajectoryData:
    """Read a trajectory written by save_trajectory."""
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        n_u = sum(1 for c in header if c.startswith("u_"))
        n_y = sum(1 for c in header if c.startswith("y_"))
        if n_u == 0 or n_y == 0 or header[0] != "t":
            raise DimensionError(f"unrecognized trajectory header: {header}")
        rows = [row for row in reader if row]
    u = np.array([[float(v) for v in row[1 : 1 + n_u]] for row in rows])
    y = np.array([[float(v) for v in row[1 + n_u : 1 + n_u + n_y]] for row in rows])
    label = "open-loop"
    meta_path = path.with_suffix(path.suffix + ".json")
    if meta_path.exists():
        label = json.loads(meta_path.read_text()).get("label", label)
    return TrajectoryData(inputs=u, outputs=y, label=label)
