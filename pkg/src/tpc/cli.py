"""Command-line frontend: generate, identify, verify, and sweep.

Exit codes follow the verify contract: 0 on success, 1 on numerical
failure, 2 on configuration errors. Verbosity comes from --log or the
TPC_LOG environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

from .errors import TpcError
from .hankel import (
    PredictorKind,
    build_hankel,
    load_trajectory,
    min_examples,
    save_trajectory,
)
from .predictors import fit_predictor, save_predictor, select_memory
from .simbench import ExperimentConfig, collect_training_data, derive_rng, monte_carlo
from .verify import run_all_checks

log = logging.getLogger("tpc")

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def _setup_logging(level: str | None) -> None:
    name = (level or os.environ.get("TPC_LOG", "info")).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


def cmd_generate(args) -> int:
    if args.d < 1:
        print(f"error: --d must be positive, got {args.d}", file=sys.stderr)
        return EXIT_CONFIG
    rng = derive_rng(args.seed, "generate", args.mode, args.d)
    data = collect_training_data(args.mode, args.d, rng)
    out = Path(args.out or f"{args.mode}_d{args.d}_seed{args.seed}.csv")
    save_trajectory(data, out, seed=args.seed)
    log.info("wrote %d samples to %s (+ metadata sidecar)", data.d, out)
    print(out)
    return EXIT_OK


def cmd_identify(args) -> int:
    try:
        data = load_trajectory(args.data)
    except (OSError, TpcError) as exc:
        print(f"error: cannot read {args.data}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    kind = PredictorKind(args.kind)
    provenance: dict = {"data": str(args.data), "data_sha256": data.sha256()}
    try:
        if args.select_m:
            candidates = [int(v) for v in args.m_candidates.split(",")]
            m, table = select_memory(data, kind, args.h, candidates)
            provenance["m_selection"] = [
                {"m": rec.m, "aic": rec.aic, "feasible": rec.feasible, "detail": rec.detail}
                for rec in table
            ]
        else:
            m = args.m
        H = build_hankel(data, m, args.h)
        pred = fit_predictor(H, kind)
    except TpcError as exc:
        need = min_examples(kind, args.m or 1, args.h, data.n_u, data.n_y)
        print(f"error: {exc} (minimum samples for {kind.value}: {need})", file=sys.stderr)
        return EXIT_NUMERICAL
    pred = dataclasses.replace(pred, provenance=provenance)
    out = Path(args.out or f"{kind.value}_m{m}_h{args.h}.json")
    save_predictor(pred, out)
    log.info("fitted %s predictor with m=%d, h=%d -> %s", kind.value, m, args.h, out)
    print(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials is not None and args.trials < 1:
        print(f"error: --trials must be positive, got {args.trials}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_all_checks(trials=args.trials, tol=args.tol, seed=args.seed)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_NUMERICAL


def cmd_sweep(args) -> int:
    try:
        config = ExperimentConfig.from_json(Path(args.config).read_text())
    except (OSError, ValueError, TypeError, KeyError) as exc:
        print(f"error: cannot parse config {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        config.master_seed = args.seed
    if args.save_runs:
        config.save_runs = True
    out_dir = Path(args.out or "sweep_out")
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = args.jobs or os.cpu_count() or 1
    t0 = time.time()
    done = {"n": 0}

    def progress(r):
        done["n"] += 1
        if done["n"] % max(1, config.runs // 20) == 0:
            log.info("run %d/%d (%.1fs elapsed)", done["n"], config.runs, time.time() - t0)

    summary = monte_carlo(config, jobs=jobs, out_dir=out_dir, progress=progress)
    path = summary.to_csv(out_dir / "summary.csv")
    (out_dir / "config.json").write_text(config.to_json() + "\n")
    log.info("sweep finished in %.1fs -> %s", time.time() - t0, path)
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tpc",
        description="Trajectory-predictor identification, control, and benchmarking",
    )
    parser.add_argument("--log", default=None, help="log level (or TPC_LOG env var)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a training/test dataset to CSV")
    p.add_argument("--mode", choices=["open", "closed"], required=True)
    p.add_argument("--d", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output CSV path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("identify", help="fit a trajectory predictor from a CSV dataset")
    p.add_argument("--data", required=True, help="trajectory CSV path")
    p.add_argument("--kind", choices=[k.value for k in PredictorKind], required=True)
    p.add_argument("--m", type=int, default=2, help="memory (ignored with --select-m)")
    p.add_argument("--h", type=int, default=10, help="prediction horizon")
    p.add_argument("--select-m", action="store_true", help="choose m by AIC")
    p.add_argument("--m-candidates", default="1,2,3", help="comma list for --select-m")
    p.add_argument("--out", default=None, help="output predictor JSON path")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("verify", help="run the numerical equivalence suites")
    p.add_argument("--trials", type=int, default=None, help="override per-check trials")
    p.add_argument("--tol", type=float, default=None, help="override per-check tolerance")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default=None, help="write the JSON report here too")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="output directory (summary.csv, runs/)")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers (default: cores)")
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--save-runs", action="store_true", help="write per-run trajectory CSVs")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.log)
    try:
        return args.func(args)
    except TpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
