#!/usr/bin/env python3
"""
InvarLab - Main Application Entry Point
Config-driven verification of stochastic invariance conditions on closed sets.
"""

import argparse
import logging
import sys
from typing import List, Optional

from run_orchestrator import (
    EXIT_CONFIG_ERROR,
    SUITE_NAMES,
    ConfigError,
    OpsVerifier,
    atomic_write,
    dump_report,
    run_check_command,
)
from run_orchestrator.check_runner import EXIT_CODES

logger = logging.getLogger('invarlab')

VERDICT_MARKS = {'pass': '✅', 'fail': '❌', 'inconclusive': '⚠️'}


def build_parser() -> argparse.ArgumentParser:
    """Command-line surface: check and verify-ops subcommands."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='64-bit seed (overrides the config)')
    common.add_argument('--threads', type=int, default=1, help='worker threads for points and paths')
    common.add_argument('--verbose', action='store_true', help='debug logging')
    common.add_argument('--quiet', action='store_true', help='no banner or status lines')

    parser = argparse.ArgumentParser(prog='invarlab', description=__doc__.strip().splitlines()[1])
    commands = parser.add_subparsers(dest='command', required=True)

    check = commands.add_parser('check', parents=[common], help='run the checks of a JSON config')
    check.add_argument('--config', required=True, help='path to the run config')
    check.add_argument('--out', default=None, help='report path (default from the config)')
    check.add_argument('--tol-eq', type=float, default=None, dest='tol_eq')
    check.add_argument('--tol-ineq', type=float, default=None, dest='tol_ineq')
    check.add_argument('--timings', action='store_true', help='record wall times in the report')

    verify = commands.add_parser('verify-ops', parents=[common], help='run the built-in property suites')
    verify.add_argument('--suite', default=None,
                        help=f"comma-separated suites from: {', '.join(SUITE_NAMES)}")
    verify.add_argument('--trials', type=int, default=200)
    verify.add_argument('--out', default=None, help='optional JSON report path')
    verify.add_argument('--perturb', default=None, help=argparse.SUPPRESS)
    return parser


def setup_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def print_banner(title: str):
    print(f"🔬 InvarLab - {title}")
    print("=" * 50)


def command_check(args) -> int:
    tol_overrides = {'tol_eq': args.tol_eq, 'tol_ineq': args.tol_ineq}
    code = run_check_command(args.config, args.out, seed=args.seed, threads=args.threads,
                             tol_overrides=tol_overrides, timings=args.timings)
    if not args.quiet:
        if code == EXIT_CONFIG_ERROR:
            print("❌ Configuration rejected (see log)")
        else:
            verdict = {value: key for key, value in EXIT_CODES.items()}[code]
            print(f"{VERDICT_MARKS[verdict]} Overall verdict: {verdict}")
    return code


def command_verify_ops(args) -> int:
    selection = None
    if args.suite is not None:
        selection = [name.strip() for name in args.suite.split(',') if name.strip()]
    try:
        verifier = OpsVerifier(seed=args.seed if args.seed is not None else 20240101,
                               trials=args.trials, perturb=args.perturb)
        report = verifier.run(selection)
    except ConfigError as exc:
        logger.error("Config error: %s", exc)
        if not args.quiet:
            print(f"❌ {exc}")
        return EXIT_CONFIG_ERROR

    if not args.quiet:
        for name, result in report['suites'].items():
            print(f"{VERDICT_MARKS[result['verdict']]} {name}: {result['violations']}/{result['count']} "
                  f"violations, worst residual {result['worst_residual']:.3e}")
    if args.out:
        text = dump_report(report)
        atomic_write(args.out, lambda stream: stream.write(text))
    return EXIT_CODES[report['verdict']]


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors share the config-error code; --help still exits 0
        return EXIT_CONFIG_ERROR if exc.code else 0
    setup_logging(args.verbose)
    if not args.quiet:
        print_banner('Stochastic Invariance Checks' if args.command == 'check' else 'Operator Suites')

    if args.command == 'check':
        return command_check(args)
    return command_verify_ops(args)


if __name__ == '__main__':
    sys.exit(main())
