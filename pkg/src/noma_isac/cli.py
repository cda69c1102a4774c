"""Command-line entry point: ``noma-isac {solve,sweep,montecarlo,beampattern}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .optimizer import Mode, SolverConfig, Status
from .scene import ConfigError, ScenarioConfig, load_config, default_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_BACKEND = 4
EXIT_MAX_ITERS = 5

_STATUS_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.INFEASIBLE: EXIT_INFEASIBLE,
    Status.BACKEND_FAILURE: EXIT_BACKEND,
    Status.MAX_ITERS: EXIT_MAX_ITERS,
}


def _weights(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for item in text.split(","):
        rc, sep, rr = item.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"weight pair {item!r} must look like RHO_C:RHO_R")
        pairs.append((float(rc), float(rr)))
    return tuple(pairs)


def _seeds(text: str) -> tuple[int, ...]:
    out = []
    for item in text.split(","):
        lo, sep, hi = item.partition("-")
        out += list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
    return tuple(out)


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario JSON (default: built-in K=2 setup)")
    common.add_argument("--seed", type=_u64, default=0, help="channel seed (master seed for campaigns)")
    common.add_argument("--scheme", choices=[m.value for m in Mode], default=Mode.NOMA.value)
    common.add_argument("--out", type=Path, required=True)
    common.add_argument("--eta0", type=float, default=SolverConfig.eta0)
    common.add_argument("--eta-shrink", type=float, default=SolverConfig.eta_shrink)
    common.add_argument("--inner-tol", type=float, default=SolverConfig.inner_tol)
    common.add_argument("--penalty-tol", type=float, default=SolverConfig.penalty_tol)
    common.add_argument("--backend", choices=["clarabel", "cvxpy"], default="clarabel")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="noma-isac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("solve", parents=[common], help="single solve; --out is a directory")

    p = sub.add_parser("sweep", parents=[common], help="trade-off sweep over weight pairs")
    p.add_argument("--weights", type=_weights, default=harness.DEFAULT_WEIGHTS,
                   help="comma-separated RHO_C:RHO_R pairs")
    p.add_argument("--seeds", type=_seeds, help="channel seeds, e.g. 0-19 or 1,5,9 (default: --seed)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="append a wall_time_s column")

    p = sub.add_parser("montecarlo", parents=[common], help="campaign over random channel draws")
    p.add_argument("--trials", type=int, default=harness.DEFAULT_TRIALS)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="append a wall_time_s column")

    p = sub.add_parser("beampattern", parents=[common],
                       help="beampattern CSV from --report, or from a fresh solve of --config/--seed")
    p.add_argument("--report", type=Path, help="report.json written by 'solve'")
    p.add_argument("--grid-step", type=float, default=1.0)
    return parser


def _solver_config(args) -> SolverConfig:
    return SolverConfig(eta0=args.eta0, eta_shrink=args.eta_shrink, inner_tol=args.inner_tol,
                        penalty_tol=args.penalty_tol, backend=args.backend)


def _scenario(args) -> ScenarioConfig:
    return default_scenario() if args.config is None else load_config(args.config)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _scenario(args)
        solver_config = _solver_config(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    scheme = Mode(args.scheme)

    if args.command == "solve":
        report = harness.run_solve(config, args.seed, scheme, args.out, solver_config)
        print(f"{report.status.value}: objective={report.objective:.6g} "
              f"throughput={report.throughput:.6g} bit/s/Hz -> {args.out}")
        if report.message:
            print(report.message, file=sys.stderr)
        return _STATUS_EXIT[report.status]

    if args.command == "sweep":
        spec = harness.SweepSpec(weights=args.weights, seeds=args.seeds or (args.seed,), scheme=scheme)
        records = harness.run_sweep(config, spec, args.out, solver_config, args.workers, args.timing)
        print(f"{len(records)} trials -> {args.out}")
        return EXIT_OK

    if args.command == "montecarlo":
        if args.trials < 1:
            print("config error: --trials must be at least 1", file=sys.stderr)
            return EXIT_CONFIG
        records = harness.run_montecarlo(config, args.trials, scheme, args.out, args.seed,
                                         solver_config, args.workers, args.timing)
        ok = sum(r.status == Status.CONVERGED.value for r in records)
        print(f"{ok}/{len(records)} trials converged -> {args.out}")
        return EXIT_OK

    # beampattern
    if args.report is not None:
        try:
            report = json.loads(args.report.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: cannot read report: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        status = Status(report.get("status", Status.BACKEND_FAILURE.value))
        source = report
    else:
        solved = harness.run_solve(config, args.seed, scheme, None, solver_config)
        status = solved.status
        source = solved
    try:
        harness.export_beampattern(source, args.grid_step, args.out, config=config)
    except harness.NotConvergedError as exc:
        print(str(exc), file=sys.stderr)
        return _STATUS_EXIT[status] or EXIT_MAX_ITERS
    print(f"beampattern -> {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
