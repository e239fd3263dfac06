"""Command-line entry point: run, sweep and oracle subcommands."""

import argparse
import shlex
import sys
from collections.abc import Sequence
from pathlib import Path

from loguru import logger
from pydantic import ValidationError

from qrasim import __version__
from qrasim.cli.config_file import ConfigError, parse_config
from qrasim.cli.csv_writer import emit_csv, format_csv
from qrasim.cli.schemas import RunManifest
from qrasim.config import get_settings
from qrasim.core.logging import setup_logging
from qrasim.core.model import Scheme, SimConfig
from qrasim.core.rewards import RewardScheme
from qrasim.presets.base import PRESET_NAMES, preset
from qrasim.services.experiments import Axis, SweepResult, SweepSpec, asymptotic_from_sweep, run_sweep
from qrasim.services.oracle import markov_oracle

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NONCONVERGED = 2


class UsageError(Exception):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrasim", description="Q-learning random access simulator")
    parser.add_argument("--version", action="version", version=f"qrasim {__version__}")
    parser.add_argument("--log-level", default=None, help="Override QRASIM_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="Run R episodes of one scenario file")
    run.add_argument("--config", required=True, type=Path, help="Scenario file")
    _add_run_options(run)

    sweep = sub.add_parser("sweep", help="Run a figure preset or a sweep file")
    source = sweep.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=PRESET_NAMES, help="Figure preset")
    source.add_argument("--config", type=Path, help="Scenario file with an axis")
    _add_run_options(sweep)

    oracle = sub.add_parser("oracle", help="Exact expected total slots for tiny scenarios")
    oracle.add_argument("--n", type=int, required=True, help="Devices N (<= 3)")
    oracle.add_argument("--k", type=int, required=True, help="Slots per frame K (<= 3)")
    oracle.add_argument("--l", type=int, default=1, help="Packets per device (must be 1)")
    oracle.add_argument("--scheme", required=True, help="independent | collaborative | packet")
    oracle.add_argument("--alpha", type=float, default=0.1, help="Learning rate")
    oracle.add_argument("--quant-bits", type=int, default=4, help="Collaborative quantizer bits")
    return parser


def _add_run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--reps", type=int, default=None, help="Episodes per grid point")
    parser.add_argument("--seed", type=int, default=None, help="Master seed")
    parser.add_argument("--max-frames", type=int, default=None, help="Frame cap per episode")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes")
    parser.add_argument("--out", type=Path, default=None, help="CSV path (stdout if omitted)")


def _single_point(config: SimConfig, reps: int) -> SweepSpec:
    return SweepSpec(
        base=config, axis=Axis.NONE, grid=[0.0], schemes=[RewardScheme.from_config(config)], reps=reps
    )


def _override(spec: SweepSpec, args: argparse.Namespace) -> SweepSpec:
    base_updates = {}
    if args.seed is not None:
        base_updates["seed"] = args.seed
    if args.max_frames is not None:
        base_updates["max_frames"] = args.max_frames
    fields = spec.model_dump()
    fields["base"] = {**fields["base"], **base_updates}
    if args.reps is not None:
        fields["reps"] = args.reps
    return SweepSpec.model_validate(fields)


def _load_spec(args: argparse.Namespace) -> SweepSpec:
    if getattr(args, "preset", None):
        return preset(args.preset, reps=args.reps, seed=args.seed, max_frames=args.max_frames)
    scenario = parse_config(args.config)
    if isinstance(scenario, SimConfig):
        scenario = _single_point(scenario, args.reps or get_settings().default_reps)
    elif args.command == "run" and scenario.axis is not Axis.NONE:
        raise UsageError("run takes a single scenario; use sweep for files with an axis")
    return _override(scenario, args)


def _report(result: SweepResult, spec: SweepSpec, argv: Sequence[str], out: Path | None) -> int:
    manifest = RunManifest.for_spec(spec, "qrasim " + shlex.join(argv))
    if out is None:
        sys.stdout.write(format_csv(result, manifest))
    else:
        if not out.parent.parts:
            out = get_settings().output_dir / out
        emit_csv(result, out, manifest)

    if result.axis is Axis.PACKETS_PER_DEVICE and len(spec.grid) >= 2:
        for scheme in spec.schemes:
            estimate = asymptotic_from_sweep(result, scheme.label)
            print(
                f"{scheme.label}: asymptotic throughput {estimate.value:.6f} "
                f"(last step {estimate.delta:+.6f})",
                file=sys.stderr if out is None else sys.stdout,
            )

    if result.nonconverged_total:
        logger.warning(f"{result.nonconverged_total} episodes did not converge")
        return EXIT_NONCONVERGED
    return EXIT_OK


def _oracle(args: argparse.Namespace) -> int:
    value = markov_oracle(
        n_devices=args.n,
        n_slots=args.k,
        packets_per_device=args.l,
        scheme=Scheme.parse(args.scheme),
        alpha=args.alpha,
        quant_bits=args.quant_bits,
    )
    print(round(value, 9))
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code.

    0 on success, 1 on usage or configuration errors, 2 when some episodes
    hit the frame cap (results are still written).
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    settings = get_settings()
    try:
        args = build_parser().parse_args(argv)
        setup_logging(args.log_level or settings.log_level, settings.log_dir)

        if args.command == "oracle":
            return _oracle(args)

        spec = _load_spec(args)
        logger.info(f"Starting {settings.app_name} v{__version__}: {args.command}")
        result = run_sweep(spec, workers=args.workers, log_level=args.log_level)
        return _report(result, spec, argv, args.out)

    except UsageError as e:
        logger.error(f"Usage error: {e}")
        print(f"qrasim: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        logger.error(f"Config error: {e}")
        print(f"qrasim: config error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, ValueError, FileNotFoundError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_USAGE


def run() -> None:
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
