"""Command line entry point: single runs, preset experiments and the verification suite.

Exit status: 0 on success, 1 when a check fails or a run aborts, 2 on bad usage.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass

from . import model, verify
from .driver import ILGConfig, LinearizationStall, run
from .fem import SolverError
from .linearization import SCHEMES, DampingCollapse, SchemeSpec
from .plotting import convergence_plot, iterations_plot

PROBLEMS = {"smooth": model.smooth_problem, "singular": model.singular_problem}
DEFAULT_BUDGET = 200_000


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    problem: str
    lam: float
    theta: float
    max_elements: int = DEFAULT_BUDGET

    def schemes(self):
        prob = PROBLEMS[self.problem]()
        return [verify.default_scheme(kind, prob) for kind in SCHEMES]


def _presets():
    out = {}
    for prefix, problem in (("fig1", "smooth"), ("fig3", "singular")):
        out[prefix + "a"] = ExperimentPreset(prefix + "a", problem, 0.5, 0.5)
        out[prefix + "b"] = ExperimentPreset(prefix + "b", problem, 0.5, 0.0)
    for prefix, problem in (("fig2", "smooth"), ("fig4", "singular")):
        out[prefix + "a"] = ExperimentPreset(prefix + "a", problem, 0.1, 0.5)
        out[prefix + "b"] = ExperimentPreset(prefix + "b", problem, 0.001, 0.5)
    return dict(sorted(out.items()))


PRESETS = _presets()


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptive-ilg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log one line per level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one adaptive run")
    p.add_argument("--problem", choices=sorted(PROBLEMS), required=True)
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    p.add_argument("--delta", type=float, default=None,
                   help="Zarantonello step / initial Newton damping (default: experiment value)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--eps-tol", type=float, default=0.0)
    p.add_argument("--max-elements", type=_positive_int, default=DEFAULT_BUDGET)
    p.add_argument("--max-steps-per-level", type=_positive_int, default=500)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("experiment", help="all three schemes for one preset")
    p.add_argument("--name", choices=list(PRESETS), required=True)
    p.add_argument("--max-elements", type=_positive_int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: results/NAME)")

    p = sub.add_parser("verify", help="oracle and theory checks")
    p.add_argument("--quick", action="store_true", help="initial mesh only, fewer samples")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _write_outputs(records, out, title):
    os.makedirs(out, exist_ok=True)
    convergence_plot(records, os.path.join(out, "convergence.svg"), title)
    iterations_plot(records, os.path.join(out, "iterations.svg"), title)


def _cmd_run(args) -> int:
    prob = PROBLEMS[args.problem]()
    scheme = verify.default_scheme(args.scheme, prob)
    if args.delta is not None:
        scheme = scheme.with_delta(args.delta)
    cfg = ILGConfig(scheme, lam=args.lam, theta=args.theta, eps_tol=args.eps_tol,
                    max_elements=args.max_elements, max_linear_steps_per_level=args.max_steps_per_level)
    record = run(cfg, prob)
    os.makedirs(args.out, exist_ok=True)
    record.write_csv(os.path.join(args.out, "record.csv"))
    _write_outputs([record], args.out, f"{args.problem}, {scheme}")
    last = record.levels[-1]
    print(f"{len(record.levels)} levels, stop: {record.stop_reason}, "
          f"{last.n_elements} elements, estimator {last.estimator:.4e}, error {last.h1_error:.4e}")
    return 0


def _cmd_experiment(args) -> int:
    preset = PRESETS[args.name]
    budget = args.max_elements or preset.max_elements
    out = args.out or os.path.join("results", preset.name)
    prob = PROBLEMS[preset.problem]()
    os.makedirs(out, exist_ok=True)
    records = []
    for scheme in preset.schemes():
        record = run(ILGConfig(scheme, lam=preset.lam, theta=preset.theta, max_elements=budget), prob)
        record.write_csv(os.path.join(out, f"{scheme.kind}.csv"))
        records.append(record)
        print(f"{scheme}: {len(record.levels)} levels, "
              f"max steps per level {int(record.column('iterations').max())}")
    _write_outputs(records, out, f"{preset.name}: {preset.problem}, lambda={preset.lam:g}, theta={preset.theta:g}")
    return 0


def _cmd_verify(args) -> int:
    reports = verify.run_suite(quick=args.quick, seed=args.seed)
    for rep in reports:
        print(rep.line())
    failed = sum(not rep.passed for rep in reports)
    print(f"{len(reports) - failed}/{len(reports)} checks passed")
    return 1 if failed else 0


COMMANDS = {"run": _cmd_run, "experiment": _cmd_experiment, "verify": _cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LinearizationStall, DampingCollapse, SolverError) as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
