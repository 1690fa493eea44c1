"""Command-line harness: simulate, sweep, gramian, selftest.

Exit codes: 0 success, 1 validation or test failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .controller import epsilon_sweep, fixed_point_solve, run_ensemble
from .inclusion import integrate_path
from .harness import (
    build_run_report,
    render_report,
    render_sweep_csv,
    render_trajectory_csv,
    sweep_metadata,
    sweep_payload,
    write_text,
)
from . import selftest as selftest_mod


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="PATH", help="experiment file (key = value lines)")
    parser.add_argument("--eps", type=float, help="regularization parameter")
    parser.add_argument("--modes", type=int, help="retained sine modes N")
    parser.add_argument("--steps", type=int, help="time steps K")
    parser.add_argument("--paths", type=int, help="Monte Carlo ensemble size")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--out", metavar="DIR", help="output directory")
    parser.add_argument("--format", choices=("csv", "json"), help="output format")
    parser.add_argument("--workers", type=int, help="parallel workers over paths")
    parser.add_argument(
        "--timing",
        action="store_true",
        default=None,
        help="record real wallclock in outputs (breaks byte-for-byte reproducibility)",
    )


def _load_config(args) -> ExperimentConfig:
    cfg = (
        ExperimentConfig.from_file(args.config)
        if args.config
        else ExperimentConfig.defaults()
    )
    return cfg.with_overrides(
        eps=args.eps,
        modes=args.modes,
        steps=args.steps,
        paths=args.paths,
        seed=args.seed,
        output_dir=args.out,
        output_format=args.format,
        workers=args.workers,
        timing=args.timing,
    )


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    problem = cfg.to_problem()
    started = time.perf_counter()
    ensemble = run_ensemble(problem, workers=cfg.workers, report_modes=cfg.report_modes)
    elapsed = time.perf_counter() - started if cfg.timing else 0.0
    report = build_run_report(cfg, problem, ensemble, wallclock_s=elapsed)
    out_dir = Path(cfg.output_dir)
    report_path = write_text(out_dir / f"report.{cfg.output_format}", render_report(report, cfg.output_format))
    for idx in range(min(cfg.dump_paths, problem.paths)):
        noise = problem.noise_for(idx)
        controlled = fixed_point_solve(problem, noise)
        free = integrate_path(problem, noise)
        write_text(
            out_dir / f"traj_controlled_p{idx}.csv",
            render_trajectory_csv(controlled, cfg, problem),
        )
        write_text(
            out_dir / f"traj_uncontrolled_p{idx}.csv",
            render_trajectory_csv(free, cfg, problem),
        )
    print(
        f"simulate: eps={problem.eps} paths={problem.paths} "
        f"error_mean={report['terminal_error']['mean']:.6g} "
        f"fp_rate={report['fixed_point']['convergence_rate']:.3f} -> {report_path}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    problem = cfg.to_problem()
    sweep = epsilon_sweep(
        problem,
        cfg.eps_list,
        workers=cfg.workers,
        confidence=cfg.confidence_level,
        timing=cfg.timing,
    )
    meta = sweep_metadata(cfg, problem)
    out_dir = Path(cfg.output_dir)
    if cfg.output_format == "csv":
        out_path = write_text(out_dir / "sweep.csv", render_sweep_csv(sweep, meta))
    else:
        payload = json.dumps(sweep_payload(sweep, meta), sort_keys=True, indent=2) + "\n"
        out_path = write_text(out_dir / "sweep.json", payload)
    for row in sweep.rows:
        status = "FAILED " + row.message if row.failed else f"error_mean={row.error_mean:.6g}"
        print(f"sweep: eps={row.eps} {status}")
    print(f"sweep: wrote {out_path}")
    return 1 if sweep.any_failed else 0


def cmd_gramian(args) -> int:
    cfg = _load_config(args)
    problem = cfg.to_problem()
    gammas = problem.gram.gammas
    if cfg.output_format == "json":
        print(json.dumps({"n": list(range(1, problem.modes + 1)), "gamma": [float(g) for g in gammas]}))
    else:
        print("n,gamma")
        for n, g in enumerate(gammas, start=1):
            print(f"{n},{float(g)!r}")
    return 0


def cmd_selftest(_args) -> int:
    results = selftest_mod.run_all()
    failures = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: worst margin {res.margin:.3e} ({res.detail})")
        failures += not res.passed
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="thermoctl",
        description=(
            "Monte Carlo toolkit for Gramian-regularized control of a stochastic "
            "heat equation with a multivalued thermostat law"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler, doc in (
        ("simulate", cmd_simulate, "run one ensemble at fixed eps and write a report"),
        ("sweep", cmd_sweep, "run the ensemble across eps_list with shared noise"),
        ("gramian", cmd_gramian, "print the Gramian diagonal for the configured basis"),
        ("selftest", cmd_selftest, "run the built-in oracle suites"),
    ):
        p = sub.add_parser(name, help=doc)
        _add_common(p)
        p.set_defaults(handler=handler)
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
