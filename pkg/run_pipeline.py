#!/usr/bin/env python3
"""
Counterdiabatic Driving Toolkit - Command-Line Runner

Runs one experiment pipeline from a YAML config, with command-line flags
overriding config values. Every run writes results.csv and manifest.json
to the output directory (--out, then output.root, then $CDKIT_OUT_DIR,
then results/).

Usage:
    # Gate-based CD on Landau-Zener at ε = 0.1
    python run_pipeline.py cd --model landau_zener --eps 0.1

    # Adiabatic baseline with the same model
    python run_pipeline.py aqc --config pipeline_config.yaml

    # Randomised variant, 4 worker processes
    python run_pipeline.py qdrift --eps 0.2 --seed 7 --workers 4

    # Measure every bound against its guarantee
    python run_pipeline.py verify-bounds --model landau_zener --eps 0.1

    # ε sweep, or a gap sweep over Grover sizes
    python run_pipeline.py sweep --config pipeline_config.yaml
    python run_pipeline.py sweep --kind gap --family grover --sizes 2,3,4

    # Plot two columns of a results table
    python run_pipeline.py plot --csv results/results.csv --x inverse_gap --y gate_count

Exit codes: 0 success, 1 pipeline failure, 2 usage or configuration error.
"""

import argparse
import logging
import sys
import time
from pathlib import Path

from cdkit.errors import CDKitError, ConfigError
from utils.constants import DEFAULT_CONFIG, LOGS_DIR, PLOT_SVG, SWEEP_KINDS, SWEEP_PIPELINES
from utils.io import load_config
from utils.logging_utils import create_timestamped_log, log_step, setup_from_config

logger = logging.getLogger("run_pipeline")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# =============================================================================
# HELPER FUNCTIONS
# =============================================================================

def format_duration(seconds: float) -> str:
    """Format duration in human-readable format."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    elif seconds < 3600:
        return f"{seconds/60:.1f}m"
    else:
        return f"{seconds/3600:.1f}h"


def parse_sizes(text: str) -> list:
    """'2,3,4' -> [2, 3, 4]."""
    try:
        return [int(s.strip()) for s in text.split(',') if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got '{text}'")


def read_config(path) -> dict:
    """Explicit --config, else the bundled default when present, else empty."""
    if path is not None:
        return load_config(path)
    if Path(DEFAULT_CONFIG).exists():
        return load_config(DEFAULT_CONFIG)
    return {}


def configure_logging(raw: dict, log_to_file: bool, name: str):
    """Route the library and runner loggers through the config's logging section."""
    logging_config = dict(raw.get('logging') or {})
    if log_to_file and not logging_config.get('file'):
        logging_config['file'] = create_timestamped_log(f"cdkit_{name}", LOGS_DIR)
    setup_from_config("cdkit", logging_config)
    setup_from_config("run_pipeline", logging_config)
    return logging_config.get('file')


# =============================================================================
# ARGUMENTS
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', type=Path, default=None,
                        help='YAML configuration (default: pipeline_config.yaml next to this script)')
    common.add_argument('--model', type=str, default=None, help='Registered model name')
    common.add_argument('--eps', type=float, default=None, help='Target accuracy ε in (0, 1]')
    common.add_argument('--q', type=int, default=None, help='Lagrange interpolation order')
    common.add_argument('--k', type=int, default=None, help='Suzuki order parameter (formula order 2k)')
    common.add_argument('--seed', type=int, default=None, help='Master seed')
    common.add_argument('--out', type=Path, default=None, help='Output directory')
    common.add_argument('--workers', type=int, default=None, help='Worker processes for sweeps')
    common.add_argument('--log', '-l', action='store_true',
                        help='Also log to a timestamped file in logs/')

    parser = argparse.ArgumentParser(
        description="Counterdiabatic Driving Toolkit Runner",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Single CD run, results in ./out
  python run_pipeline.py cd --model landau_zener --eps 0.1 --out out

  # Bound verification (one CSV row per lemma)
  python run_pipeline.py verify-bounds --model landau_zener

  # Gap sweep with 3 workers, then plot the scaling
  python run_pipeline.py sweep --kind gap --family grover --sizes 2,3,4 --workers 3 --out gaps
  python run_pipeline.py plot --csv gaps/results.csv --x inverse_gap --y gate_count
        """
    )
    sub = parser.add_subparsers(dest='command', required=True)

    for command, help_text in (
        ('cd', 'Gate-based counterdiabatic driving'),
        ('aqc', 'Trotterised adiabatic evolution baseline'),
        ('qdrift', 'Randomised counterdiabatic channel'),
        ('verify-bounds', 'Measure each error bound against its guarantee'),
    ):
        sub.add_parser(command, parents=[common], help=help_text)

    sweep = sub.add_parser('sweep', parents=[common], help='ε sweep or gap sweep')
    sweep.add_argument('--kind', choices=SWEEP_KINDS, default=None, help='Sweep axis')
    sweep.add_argument('--pipeline', dest='sweep_pipeline', choices=SWEEP_PIPELINES, default=None,
                       help='Pipeline repeated at each point')
    sweep.add_argument('--family', type=str, default=None, help='Model family for gap sweeps')
    sweep.add_argument('--sizes', type=parse_sizes, default=None, help='Comma-separated sizes')

    plot = sub.add_parser('plot', help='Plot two columns of a results CSV as SVG')
    plot.add_argument('--config', '-c', type=Path, default=None, help='YAML configuration')
    plot.add_argument('--csv', type=Path, required=True, help='Results CSV')
    plot.add_argument('--x', type=str, default=None, help='x column')
    plot.add_argument('--y', type=str, default=None, help='y column')
    plot.add_argument('--linear-x', action='store_true', help='Linear x axis')
    plot.add_argument('--linear-y', action='store_true', help='Linear y axis')
    plot.add_argument('--output', '-o', type=Path, default=None, help='SVG output path')
    plot.add_argument('--log', '-l', action='store_true', help='Also log to a timestamped file')
    return parser


def apply_sweep_flags(raw: dict, args: argparse.Namespace) -> dict:
    sweep = dict(raw.get('sweep') or {})
    for key, value in (('kind', args.kind), ('pipeline', args.sweep_pipeline),
                       ('family', args.family), ('sizes', args.sizes)):
        if value is not None:
            sweep[key] = value
    raw['sweep'] = sweep
    return raw


# =============================================================================
# COMMANDS
# =============================================================================

def run_plot(args: argparse.Namespace, raw: dict) -> int:
    from cdkit.plotting import emit_plot

    plot_config = raw.get('plot') or {}
    output = args.output or args.csv.parent / plot_config.get('output', PLOT_SVG)
    emit_plot(
        args.csv,
        x=args.x or plot_config.get('x', 'epsilon'),
        y=args.y or plot_config.get('y', 'gate_count'),
        output=output,
        logx=not args.linear_x and bool(plot_config.get('logx', True)),
        logy=not args.linear_y and bool(plot_config.get('logy', True)),
    )
    print(f"Plot written to {output}")
    return EXIT_OK


def run_experiment(args: argparse.Namespace, raw: dict) -> int:
    from cdkit.harness import ExperimentConfig, run

    if args.command == 'sweep':
        raw = apply_sweep_flags(raw, args)
    config = ExperimentConfig.from_dict(raw, {
        'pipeline': args.command,
        'model': args.model,
        'eps': args.eps,
        'q': args.q,
        'k': args.k,
        'seed': args.seed,
        'out': args.out,
        'workers': args.workers,
    })

    log_step(logger, f"{config.pipeline} on {config.model}")
    report = run(config)
    log_step(logger, f"{config.pipeline} on {config.model}", start=False)

    print(f"Results:  {report.csv_path}")
    print(f"Manifest: {report.manifest_path}")
    if report.plot_path:
        print(f"Plot:     {report.plot_path}")
    if report.fit:
        print(f"Gap scaling slope: {report.fit['slope']:.4f} (residual {report.fit['residual']:.3e})")

    if 'error' in report.frame and (report.frame['error'].fillna('') != '').all():
        logger.error("Every row failed")
        return EXIT_FAILURE
    return EXIT_OK


# =============================================================================
# MAIN
# =============================================================================

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    start = time.time()
    try:
        raw = read_config(args.config)
        log_file = configure_logging(raw, args.log, args.command)

        print("\n" + "=" * 80)
        print("COUNTERDIABATIC DRIVING TOOLKIT")
        print("=" * 80)
        print(f"Command: {args.command}")
        if log_file:
            print(f"Log file: {log_file}")
        print("-" * 80)

        if args.command == 'plot':
            status = run_plot(args, raw)
        else:
            status = run_experiment(args, raw)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CDKitError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE

    print("\n" + "=" * 80)
    print(f"Total time: {format_duration(time.time() - start)}")
    print(f"Status: {'✓ SUCCESS' if status == EXIT_OK else '✗ FAILED'}")
    print("=" * 80)
    return status


if __name__ == '__main__':
    sys.exit(main())
