import json
import subprocess
import sys

import numpy as np
import pytest

from tpc.cli import main
from tpc.hankel import load_trajectory
from tpc.predictors import load_predictor
from tpc.simbench import ExperimentConfig


def run_cli(args):
    return main(args)


def test_generate_deterministic(tmp_path, capsys):
    out = tmp_path / "data.csv"
    assert run_cli(["generate", "--mode", "closed", "--d", "200", "--seed", "7",
                    "--out", str(out)]) == 0
    first = out.read_bytes()
    assert run_cli(["generate", "--mode", "closed", "--d", "200", "--seed", "7",
                    "--out", str(out)]) == 0
    assert out.read_bytes() == first
    data = load_trajectory(out)
    assert data.d == 200 and data.n_u == 1 and data.n_y == 2


def test_generate_rejects_bad_d(tmp_path):
    assert run_cli(["generate", "--mode", "open", "--d", "0"]) == 2


def test_generate_open_row_count(tmp_path):
    out = tmp_path / "open.csv"
    assert run_cli(["generate", "--mode", "open", "--d", "30", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 31  # header + 30 rows


def test_identify_state_space_small_data(tmp_path):
    data = tmp_path / "d30.csv"
    run_cli(["generate", "--mode", "closed", "--d", "30", "--seed", "1",
             "--out", str(data)])
    out = tmp_path / "pred.json"
    assert run_cli(["identify", "--data", str(data), "--kind", "state_space",
                    "--m", "2", "--h", "10", "--out", str(out)]) == 0
    pred = load_predictor(out)
    assert pred.kind.value == "state_space"
    assert pred.m == 2 and pred.h == 10
    assert pred.provenance["data_sha256"]


def test_identify_transient_at_table_minimum(tmp_path):
    # scalar data, m=2, h=3: the transient fit needs exactly 13 samples
    rng = np.random.default_rng(0)
    from tpc.hankel import TrajectoryData, save_trajectory

    for d, expected in ((13, 0), (12, 1)):
        data = TrajectoryData(inputs=rng.standard_normal((d, 1)),
                              outputs=rng.standard_normal((d, 1)))
        path = tmp_path / f"scalar{d}.csv"
        save_trajectory(data, path)
        code = run_cli(["identify", "--data", str(path), "--kind", "transient",
                        "--m", "2", "--h", "3", "--out", str(tmp_path / "p.json")])
        assert code == expected


def test_identify_select_m(tmp_path):
    data = tmp_path / "d200.csv"
    run_cli(["generate", "--mode", "closed", "--d", "200", "--seed", "2",
             "--out", str(data)])
    out = tmp_path / "sel.json"
    assert run_cli(["identify", "--data", str(data), "--kind", "multistep",
                    "--h", "10", "--select-m", "--m-candidates", "1,2,3",
                    "--out", str(out)]) == 0
    pred = load_predictor(out)
    assert pred.m in (1, 2, 3)
    table = pred.provenance["m_selection"]
    assert [rec["m"] for rec in table] == [1, 2, 3]


def test_identify_unknown_kind_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli(["identify", "--data", "x.csv", "--kind", "bogus"])
    assert exc.value.code == 2


def test_verify_passes(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = run_cli(["verify", "--trials", "20", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["passed"] and len(report["checks"]) == 4


def test_verify_impossible_tolerance():
    # tighter than double precision roundoff: reported coherently, exit 1
    assert run_cli(["verify", "--trials", "5", "--tol", "1e-18"]) == 1


def test_verify_zero_trials_config_error():
    assert run_cli(["verify", "--trials", "0"]) == 2


def test_sweep_smoke_and_plots_inputs(tmp_path):
    cfg = ExperimentConfig(d_values=[50], training_modes=["closed"],
                           predictors=["state_space"], h=5, m_candidates=[1, 2],
                           runs=2, T_test=60, master_seed=4, lambda_=0.1,
                           save_runs=True)
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(cfg.to_json())
    out_dir = tmp_path / "out"
    assert run_cli(["sweep", "--config", str(cfg_path), "--out", str(out_dir),
                    "--jobs", "1"]) == 0
    lines = (out_dir / "summary.csv").read_text().splitlines()
    assert len(lines) == 3  # header + delta0 + relaxed rows
    run_files = list((out_dir / "runs").glob("*.csv"))
    assert len(run_files) == 4  # 2 runs x 2 controllers
    header = run_files[0].read_text().splitlines()[0]
    assert header.startswith("t,u_1,y_1,y_2,yr_1,yr_2,cost")


def test_sweep_config_parse_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli(["sweep", "--config", str(bad)]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tpc.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "generate" in proc.stdout and "sweep" in proc.stdout
