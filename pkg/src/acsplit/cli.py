"""Command line entry point: ``acsplit simulate | convergence | verify``.

Exit codes: 0 ok, 1 invalid configuration, 2 a requested assertion failed,
3 numerical failure inside a run.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import build_problem, mc_rate_study
from .config import SCHEME_ALIASES, ConfigError, RunConfig
from .nonlinear import ConvergenceError
from .noise import sample_path
from .schemes import BESolver, SchemeConfig, StepFailure, run

EXIT_OK, EXIT_CONFIG, EXIT_ASSERT, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override noise.seed")
    common.add_argument("--samples", type=int, help="override noise.samples")
    common.add_argument("--scheme", choices=["split-step", "em", "backward-euler"])
    common.add_argument("--out", type=Path, help="output directory (overrides output.dir)")

    p = argparse.ArgumentParser(prog="acsplit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common],
                         help="run the scheme at the finest ladder level and write norms")
    sim.add_argument("--steps", type=int, help="number of steps (default: finest ladder level)")
    conv = sub.add_parser("convergence", parents=[common], help="coupled-path strong-error study")
    conv.add_argument("--assert-rate", type=float, metavar="FLOAT",
                      help="exit 2 unless the fitted slope is at least FLOAT")
    ver = sub.add_parser("verify", parents=[common], help="run the property check suite")
    ver.add_argument("--no-study", action="store_true",
                     help="skip the Monte Carlo checks (deterministic checks only)")
    return p


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.noise.seed = args.seed
    if args.samples is not None:
        cfg.noise.samples = args.samples
    if args.scheme is not None:
        cfg.scheme = SCHEME_ALIASES[args.scheme]
    if args.out is not None:
        cfg.output.dir = str(args.out)
    return cfg.validate()


def _header(cfg: RunConfig) -> str:
    return f"# config_hash={cfg.config_hash()} seeds={' '.join(map(str, cfg.seeds))}\n"


def cmd_simulate(cfg: RunConfig, steps=None) -> int:
    basis, ac, cov, X0 = build_problem(cfg)
    N = steps or max(cfg.time.ladder)
    samples = list(range(cfg.noise.samples)) if cfg.noise.samples > 1 else None
    path = sample_path(cov, cfg.time.T, N, cfg.noise.seed, samples=samples)
    scfg = SchemeConfig(cfg.time.T, N, cfg.nonlinearity.beta, cfg.scheme_name,
                        BESolver(cfg.be_solver.tolerance, cfg.be_solver.max_iter))
    traj = run(ac, X0, path, scfg)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    states = traj.states.reshape(-1, N + 1, basis.n_modes)
    l2 = basis.norm_s(states, 0)
    h1 = basis.norm_s(states, 1)
    csv_path = out / "simulate.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write(_header(cfg))
        w = csv.writer(fh)
        w.writerow(["sample", "t", "norm", "norm_h1"])
        for s in range(states.shape[0]):
            for j, t in enumerate(traj.times):
                w.writerow([s, repr(float(t)), repr(float(l2[s, j])), repr(float(h1[s, j]))])
    written = [csv_path]
    if cfg.output.dump_states:
        npz = out / "states.npz"
        np.savez(npz, states=states, times=traj.times, eigenvalues=basis.eigenvalues,
                 config_hash=cfg.config_hash(), seeds=np.asarray(cfg.seeds, dtype=np.uint64))
        written.append(npz)
    if "be_iterations" in traj.diagnostics:
        print(f"max backward Euler iterations per step: {traj.diagnostics['be_iterations'].max()}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, assert_rate=None) -> int:
    report = mc_rate_study(cfg)
    for p in report.write(cfg.output.dir):
        print(f"wrote {p}")
    for lv in report.levels:
        print(f"k={lv.k:.6g}  rms sup error={lv.rms:.4e}  (stderr of mean sq {lv.stderr:.2e})")
    slope = report.fitted_slope
    print(f"scheme={report.scheme} slope={'degenerate' if slope is None else f'{slope:.3f}'}")
    if report.be_ss_gap_slope is not None:
        print(f"BE - split-step squared gap slope={report.be_ss_gap_slope:.3f}")
    if cfg.study.reference_check and not report.reference.get("reliable", True):
        print("warning: reference not self-consistent (halving k_ref moved an error by >= 10%)")
    if assert_rate is not None and (slope is None or slope < assert_rate):
        print(f"rate assertion failed: slope {slope} < {assert_rate}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def cmd_verify(cfg: RunConfig, include_study=True) -> int:
    from .verify import run_checks

    results = run_checks(cfg, include_study=include_study)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        print(r.line())
    failures = sum(not r.passed for r in results)
    table = {
        "config_hash": cfg.config_hash(),
        "seeds": cfg.seeds,
        "failures": failures,
        "checks": [dict(name=r.name, group=r.group, passed=r.passed, measured=r.measured,
                        bound=r.bound, lower=r.lower, margin=r.margin, detail=r.detail) for r in results],
    }
    (out / "verify.json").write_text(json.dumps(table, indent=2))
    print(f"{failures} failure(s) out of {len(results)} checks")
    return EXIT_OK if failures == 0 else EXIT_ASSERT


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, OSError) as exc:
        problems = getattr(exc, "problems", None) or [("<config>", str(exc))]
        for field_path, msg in problems:
            print(f"config error: {field_path}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            return cmd_simulate(cfg, args.steps)
        if args.command == "convergence":
            return cmd_convergence(cfg, args.assert_rate)
        return cmd_verify(cfg, include_study=not args.no_study)
    except (StepFailure, ConvergenceError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
