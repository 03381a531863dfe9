#!/usr/bin/env python3
"""
DelayGalerkin - spectral-Galerkin simulator and estimate verifier for
nonlocal reaction-diffusion equations with state-dependent delay.
"""

import argparse
import logging
import sqlite3
import sys
from pathlib import Path
from typing import List, Optional

from delaygalerkin import Setup
from delaygalerkin.config import Config
from delaygalerkin.models.report import VerificationReport
from delaygalerkin.services import export_service, registry_service, verification
from delaygalerkin.services.galerkin_integrator import GalerkinIntegrator
from delaygalerkin.services.scenario_parser import load_scenario, parse_number
from delaygalerkin.utils.errors import (BasisError, ExportError, HistoryRangeError, KernelError,
                                        NonFiniteStateError, ScenarioError)
from delaygalerkin.utils.logging_setup import configure_logging

logger = logging.getLogger('delaygalerkin.cli')

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CHECK_FAILED = 2
EXIT_IO = 3

VALIDATION_ERRORS = (ScenarioError, BasisError, KernelError, HistoryRangeError, NonFiniteStateError)


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the validation code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _number(text: str) -> float:
    try:
        return parse_number(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument('config', help='Scenario file')
    common.add_argument('--out', help='Output directory (overrides [output] directory)')
    common.add_argument('--dt', type=_number, help='Time step, e.g. 1/128')
    common.add_argument('--modes', type=int, help='Galerkin order m')
    common.add_argument('--seed', type=int, help='Seed for randomized initial data')
    common.add_argument('--plot-data', action='store_true', help='Write per-figure CSV files')
    common.add_argument('--strict', action='store_true', help='Exit with code 2 when any check fails')
    common.add_argument('--no-record', action='store_true', help='Do not record the run in the registry')
    common.add_argument('--debug', action='store_true', help='Print tracebacks on errors')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Warnings and errors only')

    parser = _ArgumentParser(description='DelayGalerkin simulator and estimate verifier')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('run', parents=[common], help='Single simulation, exports the trajectory')
    pair = commands.add_parser('pair', parents=[common], help='Continuous-dependence experiment')
    pair.add_argument('--delta', type=_number, default=1e-3, help='Perturbation size')
    sweep = commands.add_parser('sweep-n', parents=[common], help='Distributed -> discrete delay convergence')
    sweep.add_argument('--n-max', type=int, help='Largest kernel index')
    commands.add_parser('verify', parents=[common], help='Full verification report')
    attractor = commands.add_parser('attractor', parents=[common], help='Absorbing ball and attraction checks')
    attractor.add_argument('--ensemble', type=int, default=4, help='Members of the attraction ensemble')

    serve = commands.add_parser('serve', help='Serve the run registry as JSON')
    serve.add_argument('--host', default='127.0.0.1', help='Host to bind to')
    serve.add_argument('--port', type=int, default=5000, help='Port to bind to')
    serve.add_argument('--debug', action='store_true', help='Enable debug mode')
    return parser


def _log_level(args) -> str:
    if getattr(args, 'verbose', False):
        return 'DEBUG'
    if getattr(args, 'quiet', False):
        return 'WARNING'
    return Config.LOG_LEVEL


def _record(args, command: str, scenario, text: str, output: Path, report: Optional[VerificationReport] = None,
            trajectory=None) -> None:
    if args.no_record or not Config.RECORD_RUNS:
        return
    try:
        if report is not None:
            registry_service.record_report(report, scenario, str(output), trajectory)
        else:
            registry_service.record_run(command, scenario, trajectory, text, str(output))
    except sqlite3.Error as e:
        logger.warning("Could not record run in the registry: %s", e)


def _finish_report(args, scenario, text: str, report: VerificationReport, out_dir: Path) -> int:
    path = export_service.export_report(report, out_dir / f'{scenario.name}_{report.command}_report.json')
    if args.plot_data or scenario.output.plot_data or report.command == 'sweep-n':
        export_service.export_plot_data(report, out_dir / 'plot_data')
    _record(args, report.command, scenario, text, path, report=report)
    for record in report.records:
        status = 'ok  ' if record.passed else 'FAIL'
        print(f"{status} {record.name:<24} margin={record.margin:.4g}")
    print(f"Report written to {path}")
    failed = report.failed()
    if failed and args.strict:
        worst = min(failed, key=lambda record: record.margin)
        print(f"check failed: {worst.name} (margin {worst.margin:.4g}; {len(failed)} failing)", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _execute(args) -> int:
    overrides = {'dt': args.dt, 'modes': args.modes, 'seed': args.seed, 'out': args.out,
                 'plot_data': args.plot_data or None}
    scenario, text = load_scenario(args.config, overrides)
    out_dir = Path(scenario.output.directory)

    if args.command == 'run':
        trajectory = GalerkinIntegrator(scenario).run()
        path = export_service.export_trajectory(trajectory, out_dir / f'{scenario.name}_trajectory.csv',
                                                coefficients=scenario.output.coefficients)
        _record(args, 'run', scenario, text, path, trajectory=trajectory)
        print(f"Trajectory written to {path} ({trajectory.nodes} nodes, |u(T)| = {trajectory.norm_l2[-1]:.6g})")
        return EXIT_OK
    if args.command == 'pair':
        report = verification.pair_report(scenario, args.delta, text)
    elif args.command == 'sweep-n':
        report = verification.sweep_report(scenario, args.n_max, text)
    elif args.command == 'verify':
        report = verification.verify_report(scenario, text)
    else:
        report = verification.attractor_report(scenario, args.ensemble, text)
    return _finish_report(args, scenario, text, report, out_dir)


def _serve(args) -> int:
    app = Setup.create_app()
    logger.info("Serving the run registry on http://%s:%d", args.host, args.port)
    try:
        app.run(debug=args.debug, host=args.host, port=args.port)
    except KeyboardInterrupt:
        logger.info("Shutting down")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(_log_level(args))
    if args.command == 'serve':
        return _serve(args)
    try:
        return _execute(args)
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        code = EXIT_VALIDATION
    except OSError as e:
        reason = str(e) if isinstance(e, ExportError) else f"{getattr(e, 'filename', '') or args.config}: {e.strerror or e}"
        print(f"I/O error: {reason}", file=sys.stderr)
        code = EXIT_IO
    if args.debug:
        import traceback
        traceback.print_exc()
    return code


if __name__ == '__main__':
    sys.exit(main())
