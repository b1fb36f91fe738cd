"""Acceptance suite: every criterion at its stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one PASS/FAIL line
per criterion. The replica sweep (200 runs, full grid) takes a few minutes;
its summary is shared across the criteria that read it.
"""

import os
import time

import numpy as np
import pytest

import tpc
from tpc import PredictorKind, QuadraticCost, TrajectoryData, build_hankel, min_examples
from tpc.errors import TpcError
from tpc.simbench import ExperimentConfig, collect_training_data, derive_rng, monte_carlo
from tpc.statespace import fit_statespace, verify_theorem3
from tpc.verify import (
    check_corollary4,
    check_multistep_optimality,
    check_subspace_equivalence,
)

JOBS = os.cpu_count() or 1
CAUSAL = ["multistep", "transient", "fixed_length", "state_space"]
ALL_KINDS = ["subspace"] + CAUSAL


def report(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {name}: {status} {detail}")


def test_theorem3_exactness():
    data = collect_training_data("closed", 300, derive_rng(77, "thm3"))
    pred, model = fit_statespace(build_hankel(data, 2, 10))
    t0 = time.time()
    rep = verify_theorem3(model, pred, trials=1000, tol=1e-9,
                          rng=np.random.default_rng(77))
    elapsed = time.time() - t0
    ok = rep.passed and elapsed < 1.0
    report("theorem3-exactness", ok,
           f"(max dev {rep.max_deviation:.2e}, {elapsed:.2f}s)")
    assert rep.max_deviation <= 1e-9
    assert elapsed < 1.0


def test_subspace_oracle_equivalence():
    res = check_subspace_equivalence(trials=100, tol=1e-8, seed=101)
    report("subspace-lq-equivalence", res.passed, f"(max dev {res.max_deviation:.2e})")
    assert res.passed


def test_multistep_constrained_ls_optimality():
    res = check_multistep_optimality(trials=50, tol=1e-7, seed=102)
    report("multistep-constrained-ls", res.passed, f"(max dev {res.max_deviation:.2e})")
    assert res.passed


def test_corollary4_mpc_crosscheck():
    res = check_corollary4(trials=50, tol=1e-8, seed=103)
    report("corollary4-mpc-equivalence", res.passed, f"(max dev {res.max_deviation:.2e})")
    assert res.passed


@pytest.mark.parametrize("dims", [(2, 3, 1, 1), (1, 4, 1, 2)])
def test_table1_boundary(dims):
    # identification succeeds at exactly d = min_examples (the smallest raw
    # sample count at which every regressor can reach full row rank) and
    # errors at one sample fewer, on persistently exciting data
    m, h, n_u, n_y = dims
    rng = np.random.default_rng(777)
    results = []
    for kind in PredictorKind:
        d_min = min_examples(kind, m, h, n_u, n_y)
        data_ok = TrajectoryData(inputs=rng.standard_normal((d_min, n_u)),
                                 outputs=rng.standard_normal((d_min, n_y)))
        pred = tpc.fit_predictor(build_hankel(data_ok, m, h), kind)
        assert pred.kind == kind
        data_short = TrajectoryData(inputs=rng.standard_normal((d_min - 1, n_u)),
                                    outputs=rng.standard_normal((d_min - 1, n_y)))
        with pytest.raises(TpcError):
            tpc.fit_predictor(build_hankel(data_short, m, h), kind)
        results.append(kind.value)
    report(f"table1-boundary{dims}", True, f"(kinds: {', '.join(results)})")


@pytest.fixture(scope="module")
def replica_sweep():
    cfg = ExperimentConfig(
        d_values=[30, 100, 500],
        training_modes=["open", "closed"],
        predictors=ALL_KINDS,
        h=10,
        m_candidates=[1, 2, 3],
        runs=200,
        T_test=400,
        master_seed=2024,
    )
    t0 = time.time()
    summary = monte_carlo(cfg, jobs=JOBS)
    elapsed = time.time() - t0
    print(f"\n[replica sweep: 200 runs x 2 modes x 3 d x 5 kinds in {elapsed:.0f}s]")
    assert elapsed < 600.0, "sweep exceeded the 10-minute budget"
    return summary


def test_replica_sweep_a_normalized_cost(replica_sweep):
    s = replica_sweep
    failures = []
    details = []
    for kind in CAUSAL:
        for d, bound in ((30, 1.08), (100, 1.05), (500, 1.05)):
            cell = s.cell(kind, "closed", d)
            if cell.n_ok == 0:
                # transient at d=30 cannot be fit: its minimum data
                # requirement (41 samples at m=1, h=10) exceeds d
                assert kind == "transient" and d == 30
                assert min_examples(PredictorKind.TRANSIENT, 1, 10, 1, 2) > 30
                continue
            ratio = s.row((kind, "closed", d, "delta0"))["cost_ratio_vs_lqg"]
            details.append(f"{kind}@{d}={ratio:.3f}")
            if not ratio <= bound:
                failures.append(f"{kind}@d={d}: {ratio:.3f} > {bound}")
    report("replica-(a)-normalized-cost", not failures,
           "(" + ", ".join(details) + ")")
    assert not failures, failures


def test_replica_sweep_b_statespace_lowest_rmse(replica_sweep):
    s = replica_sweep
    failures = []
    for metric in ("mean_rmse_open_test", "mean_rmse_closed_test"):
        sts = s.row(("state_space", "closed", 30, "delta0"))[metric]
        for kind in ALL_KINDS:
            if kind == "state_space":
                continue
            cell = s.cell(kind, "closed", 30)
            if cell.n_ok == 0:
                continue  # transient infeasible at d=30
            other = s.row((kind, "closed", 30, "delta0"))[metric]
            if not sts <= other:
                failures.append(f"{metric}: state_space {sts:.4f} > {kind} {other:.4f}")
    report("replica-(b)-statespace-lowest-rmse", not failures, "; ".join(failures))
    assert not failures, failures


def test_replica_sweep_c_open_rmse_brackets(replica_sweep):
    s = replica_sweep
    sbs = s.row(("subspace", "open", 30, "delta0"))["mean_rmse_open_test"]
    fxl = s.row(("fixed_length", "open", 30, "delta0"))["mean_rmse_open_test"]
    ok = 0.25 <= sbs <= 0.55 and 0.18 <= fxl <= 0.40
    report("replica-(c)-open-rmse-brackets", ok,
           f"(subspace {sbs:.3f} in [0.25,0.55], fixed_length {fxl:.3f} in [0.18,0.40])")
    assert 0.25 <= sbs <= 0.55
    assert 0.18 <= fxl <= 0.40


def _cells_differ_significantly(s, key_hi, key_lo):
    """True if mean cost of key_hi exceeds key_lo beyond two standard errors.

    Uses the per-cell summary statistics (the same numbers summary.csv
    carries), combining the two cells' standard errors.
    """
    hi = s.row(key_hi)
    lo = s.row(key_lo)
    se = np.hypot(hi["stderr_cost"], lo["stderr_cost"])
    return hi["mean_cost"] - lo["mean_cost"] > 2.0 * se, hi["mean_cost"] - lo["mean_cost"], se


def test_monotonicity_and_closed_loop_advantage(replica_sweep):
    s = replica_sweep
    failures = []
    # mean normalized cost non-increasing in d, open-loop training, causal kinds
    for kind in CAUSAL:
        ds = [d for d in (30, 100, 500) if s.cell(kind, "open", d).n_ok > 0]
        for d1, d2 in zip(ds, ds[1:]):
            rose, diff, se = _cells_differ_significantly(
                s, (kind, "open", d2, "delta0"), (kind, "open", d1, "delta0"))
            if rose:
                failures.append(
                    f"open {kind}: cost rose {d1}->{d2} by {diff:.0f} (2SE {2*se:.0f})")
    # closed-loop training no more costly than open-loop at each d
    for kind in ALL_KINDS:
        for d in (30, 100, 500):
            if s.cell(kind, "closed", d).n_ok == 0 or s.cell(kind, "open", d).n_ok == 0:
                continue
            worse, diff, se = _cells_differ_significantly(
                s, (kind, "closed", d, "delta0"), (kind, "open", d, "delta0"))
            if worse:
                failures.append(
                    f"closed>open {kind}@d={d}: diff {diff:.0f} (2SE {2*se:.0f})")
    report("monotonicity-and-closed-advantage", not failures, "; ".join(failures))
    assert not failures, failures


@pytest.fixture(scope="module")
def relax_sweep():
    cfg = ExperimentConfig(
        d_values=[50],
        training_modes=["closed"],
        predictors=["state_space"],
        h=10,
        m_candidates=[1, 2, 3],
        runs=500,
        T_test=400,
        lambda_=0.1,
        master_seed=2025,
    )
    return monte_carlo(cfg, jobs=JOBS)


def test_relax_and_regularize(relax_sweep):
    s = relax_sweep
    d0 = s.cell("state_space", "closed", 50, "delta0")
    rx = s.cell("state_space", "closed", 50, "relaxed")
    ok = ~np.isnan(d0.cost) & ~np.isnan(rx.cost)
    increase = float(np.mean(rx.cost[ok]) / np.mean(d0.cost[ok]) - 1.0)
    mean_u_d0 = float(np.mean(d0.mean_abs_u[ok]))
    mean_u_rx = float(np.mean(rx.mean_abs_u[ok]))
    in_band = 0.04 <= increase <= 0.24
    less_effort = mean_u_rx < mean_u_d0
    report("relax-and-regularize", in_band and less_effort,
           f"(cost increase {100 * increase:.1f}% vs [4%, 24%]; "
           f"mean|u| {mean_u_rx:.3f} < {mean_u_d0:.3f})")
    assert less_effort
    assert 0.04 <= increase <= 0.24, f"cost increase {100 * increase:.1f}% outside [4%, 24%]"
