"""Command-line entry point: ``qfpd optimize | test | presets | oracle``.

``optimize`` writes ``trajectory.csv``, ``control.csv`` and ``manifest.json``
into the output directory; ``test`` replays a control file on an ensemble and
writes ``ensemble.json`` plus ``ensemble_manifest.json``.  All numeric output
uses 17 significant digits, so identical runs give identical bytes apart from
the manifest timestamp.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .ensemble import EnsembleReport, Trajectory, run_optimization, run_testing
from .errors import (ConfigurationError, ConvergenceError, DimensionError, NumericalError,
                     ValidationError)
from .lindblad import PRESETS

FLOAT_FMT = "%.17g"

log = logging.getLogger("qfpd")


def write_trajectory(path, traj: Trajectory):
    """CSV with ``t, u, fidelity, pop_0..pop_{l-1}, trace_drift``.

    ``u`` on row ``t`` is the field applied during the following step, so
    the last row carries ``nan``.
    """
    pops = traj.populations
    u = np.full(traj.states.shape[0], np.nan)
    u[:traj.steps] = traj.controls[:, 0]
    table = np.column_stack([traj.times, u, traj.fidelities, pops, traj.trace_drift])
    header = ",".join(["t", "u", "fidelity"] + [f"pop_{k}" for k in range(pops.shape[1])]
                      + ["trace_drift"])
    np.savetxt(path, table, fmt=FLOAT_FMT, delimiter=",", header=header, comments="")


def write_control(path, controls):
    np.savetxt(path, np.asarray(controls, dtype=float).reshape(-1, 1), fmt=FLOAT_FMT,
               header="u", comments="")


def read_control(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"control file not found: {path}", field="control")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ValidationError(f"cannot read control file {path}: {exc}", field="control") from exc
    if data.shape[0] == 0 or data.shape[1] != 1:
        raise ValidationError(f"control file {path} must hold one column of values",
                              field="control")
    if not np.all(np.isfinite(data)):
        raise ValidationError(f"control file {path} contains non-finite values", field="control")
    return data[:, 0]


def _dump_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def ensemble_payload(report: EnsembleReport) -> dict:
    return {
        "n_members": report.n_members,
        "seed": report.seed,
        "mean": report.mean,
        "min": report.min,
        "max": report.max,
        "fidelities": [float(f) for f in report.final_fidelities],
    }


def manifest_payload(cfg: RunConfig, command: str, summary: dict) -> dict:
    return {
        "command": command,
        "code_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "seed": cfg.seed,
        "defaults_used": cfg.defaults_used,
        "config": cfg.to_dict(),
        "summary": summary,
    }


def _resolved(args) -> RunConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(seed=args.seed, members=getattr(args, "members", None),
                              out_dir=args.out_dir, sigma=args.sigma, g=args.g,
                              sample_control=True if getattr(args, "sample_control", False)
                              else None)


def cmd_optimize(args) -> int:
    cfg = _resolved(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj, controls = run_optimization(
        cfg.system, cfg.noise_ideal, cfg.x0, cfg.x_e, cfg.dt, cfg.horizon, cfg.seed,
        stop_fidelity=cfg.stop_fidelity, dwell=cfg.dwell, target=cfg.d_target,
        sample=cfg.sample_control, solver_tol=cfg.solver_tol, noise_passes=cfg.noise_passes,
        progress_every=args.progress)
    write_trajectory(out / "trajectory.csv", traj)
    write_control(out / "control.csv", controls)
    summary = {
        "steps": traj.steps,
        "stopped_early": traj.stopped_early,
        "final_fidelity": float(traj.fidelities[-1]),
        "max_abs_trace_drift": float(np.max(np.abs(traj.trace_drift))),
    }
    _dump_json(out / "manifest.json", manifest_payload(cfg, "optimize", summary))
    print(f"optimize: {traj.steps} steps, final fidelity {summary['final_fidelity']:.6f}"
          f"{' (target held)' if traj.stopped_early else ''} -> {out}")
    return 0


def cmd_test(args) -> int:
    cfg = _resolved(args)
    controls = read_control(args.control)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = run_testing(cfg.system, cfg.noise_ideal, controls, cfg.x0, cfg.x_e, cfg.dt,
                         cfg.ensemble_size, cfg.seed, target=cfg.d_target)
    _dump_json(out / "ensemble.json", ensemble_payload(report))
    summary = {"control_file": str(args.control), "steps": int(controls.shape[0]),
               "mean": report.mean, "min": report.min, "max": report.max}
    _dump_json(out / "ensemble_manifest.json", manifest_payload(cfg, "test", summary))
    print(f"test: {report.n_members} members, mean {report.mean:.6f}, "
          f"min {report.min:.6f}, max {report.max:.6f} -> {out}")
    return 0


def cmd_presets(args) -> int:
    for name, desc in PRESETS.items():
        print(f"{name}: {desc}")
    return 0


def cmd_oracle(args) -> int:
    from .checks import run_checks

    failed = 0
    for name, ok, detail in run_checks():
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qfpd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out-dir", help="output directory")
        p.add_argument("--sigma", type=float, help="override the multiplicative noise variance")
        p.add_argument("--g", type=float, help="override the output noise variance")

    opt = sub.add_parser("optimize", help="closed-loop optimization on the nominal system")
    run_flags(opt)
    opt.add_argument("--sample-control", action="store_true",
                     help="apply u ~ N(v, R) instead of the mean v")
    opt.add_argument("--progress", type=int, default=0, metavar="N",
                     help="log every N steps (with -v)")
    opt.set_defaults(func=cmd_optimize)

    test = sub.add_parser("test", help="replay a control signal on a noisy ensemble")
    run_flags(test)
    test.add_argument("--control", required=True, help="control.csv from optimize")
    test.add_argument("--members", type=int, help="ensemble size")
    test.set_defaults(func=cmd_test)

    sub.add_parser("presets", help="list built-in systems").set_defaults(func=cmd_presets)
    sub.add_parser("oracle", help="check numerics against reference oracles") \
        .set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigurationError, ValidationError, DimensionError) as exc:
        field = getattr(exc, "field", None)
        print(f"qfpd: error: {exc}" + (f" [field: {field}]" if field else ""), file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        where = f" at step {exc.step}" if exc.step is not None else ""
        print(f"qfpd: convergence failure{where}: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"qfpd: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError) as exc:
        print(f"qfpd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
