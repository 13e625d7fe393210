# coding=utf-8
"""
Command line entry point.

    stap-codesign run --solver qcqp --iters 20 --out trace.csv
    stap-codesign compare --rescale --out traces/
    stap-codesign montecarlo --trials 50 --lambda-mode zero --out table.csv

Exit codes: 0 on success, 2 on validation errors, 3 on numerical failures.
"""

import argparse
import logging
import sys
from typing import List, Optional

from .am_driver import RunOptions, run
from .const import SOLVER_KIND, MULTIPLIER_MODE, TRACE_FORMAT
from .exceptions import StapCodesignException, ValidationException, UnsupportedSolverException
from .harness import ExperimentSpec, load_defaults, load_scenario, load_default_scenario, parse_solver_list, \
    run_comparison, emit_trace, emit_table

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="Scenario JSON file (bundled airborne scenario when omitted)")
    common.add_argument("--config", help="INI file overriding the bundled defaults.conf")
    common.add_argument("--iters", type=int, help="Number of alternating minimization iterations")
    common.add_argument("--lambda-mode", choices=MULTIPLIER_MODE.ALL, help="Power multiplier mode")
    common.add_argument("--rescale", action="store_const", const=True, default=None,
                        help="Also record the objective of the pair rescaled to ||s||^2 = P_o")
    common.add_argument("--seed", type=int, help="Random seed of the initial waveforms")
    common.add_argument("--format", choices=TRACE_FORMAT.ALL, help="Trace output format")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="stap-codesign",
                                     description="Joint STAP receive filter and waveform design by "
                                                 "alternating minimization.")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_run = subparsers.add_parser("run", parents=[common], help="Single solver run")
    p_run.add_argument("--solver", choices=SOLVER_KIND.ALL, default=SOLVER_KIND.QCQP)
    p_run.add_argument("--out", default="-", help="Trace file, standard output by default")

    p_compare = subparsers.add_parser("compare", parents=[common], help="All solvers from one shared start")
    p_compare.add_argument("--solver", help="Comma separated solver list")
    p_compare.add_argument("--trials", type=int, default=1)
    p_compare.add_argument("--out", help="Directory receiving one trace per solver and the table")

    p_mc = subparsers.add_parser("montecarlo", parents=[common], help="Monte Carlo comparison table")
    p_mc.add_argument("--solver", help="Comma separated solver list")
    p_mc.add_argument("--trials", type=int)
    p_mc.add_argument("--out", default="-", help="Table file, standard output by default")
    return parser


def _pick(value, default):
    return default if value is None else value


def _run_command(args, defaults, scenario) -> None:
    max_iter = _pick(args.iters, defaults.max_iter)
    if max_iter < 0:
        raise ValidationException("max_iter must be >= 0, got {}".format(max_iter))
    opts = RunOptions(max_iter=max_iter, obj_tol=defaults.obj_tol,
                      lambda_mode=_pick(args.lambda_mode, defaults.lambda_mode),
                      rescale=_pick(args.rescale, defaults.rescale), drift_samples=defaults.drift_samples,
                      seed=_pick(args.seed, scenario.seed))
    report = run(scenario, args.solver, opts)
    _logger.info("Final objective %.10e, output SINR %.6e, drift %s, stationary %s",
                 report.final_objective, report.final_sinr, report.max_constraint_drift, report.stationary)
    emit_trace(report.trace, args.out, _pick(args.format, defaults.format))


def _experiment(args, defaults, scenario, trials: int, output_path: Optional[str]) -> ExperimentSpec:
    solvers = parse_solver_list(args.solver) if args.solver else defaults.solvers
    if trials < 1:
        raise ValidationException("trials must be >= 1, got {}".format(trials))
    return ExperimentSpec(scenario=scenario, solvers=solvers,
                          lambda_mode=_pick(args.lambda_mode, defaults.lambda_mode),
                          rescale=_pick(args.rescale, defaults.rescale), trials=trials,
                          max_iter=_pick(args.iters, defaults.max_iter), seed=_pick(args.seed, defaults.seed),
                          output_path=output_path, obj_tol=defaults.obj_tol, drift_samples=defaults.drift_samples,
                          format=_pick(args.format, defaults.format), progress=True)


def main(argv: Optional[List[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        defaults = load_defaults(args.config)
        scenario = load_scenario(args.scenario) if args.scenario else load_default_scenario()
        if args.command == "run":
            _run_command(args, defaults, scenario)
        elif args.command == "compare":
            _, table = run_comparison(_experiment(args, defaults, scenario, args.trials, args.out))
            emit_table(table, "-")
        elif args.command == "montecarlo":
            spec = _experiment(args, defaults, scenario, _pick(args.trials, defaults.trials), None)
            _, table = run_comparison(spec)
            emit_table(table, args.out)
        else:
            raise UnsupportedSolverException("Unknown command {}".format(args.command))
    except ValidationException as e:
        _logger.error("%s", e)
        return EXIT_VALIDATION
    except StapCodesignException as e:
        _logger.error("%s", e)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
