"""CLI entry point for ESAFL."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Any

from esafl import __version__

if TYPE_CHECKING:
    from esafl.config.settings import Settings
    from esafl.scheme.params import SchemeParams

logger = logging.getLogger("esafl")

SHAPES = ["fcn", "alexnet", "lstm"]


def _common_parser() -> argparse.ArgumentParser:
    """Flags shared by every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--profile",
        type=str,
        default=None,
        help="Parameter profile file or built-in name (default: $ESAFL_PROFILE or desk)",
    )
    common.add_argument(
        "--seed",
        type=int,
        default=0,
        help="Seed of every random choice; equal seeds give equal output (default: 0)",
    )
    common.add_argument(
        "--clients",
        type=int,
        default=None,
        help="Override the cohort size N of the profile",
    )
    common.add_argument(
        "--logq0",
        type=int,
        default=None,
        help="Override the quantization width log_q0 of the profile",
    )
    common.add_argument(
        "--log-level",
        type=str,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        default=None,
        help="Logging level (default: $ESAFL_LOG_LEVEL or INFO)",
    )
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esafl",
        description="ESAFL - encrypted secure aggregation for federated learning",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )
    common = _common_parser()
    commands = parser.add_subparsers(dest="command", required=True)

    keygen = commands.add_parser("keygen", parents=[common], help="Deal keys to a directory")
    keygen.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Key directory (default: <data dir>/keys)",
    )

    estimate = commands.add_parser(
        "estimate", parents=[common], help="Ciphertext counts and traffic, no cryptography"
    )
    _add_length_flags(estimate)

    selftest = commands.add_parser("selftest", parents=[common], help="Run the self-test suites")
    selftest.add_argument(
        "--trials",
        type=int,
        default=10,
        help="Random trials per suite; 0 checks golden vectors only (default: 10)",
    )
    selftest.add_argument(
        "--vectors",
        type=Path,
        default=None,
        help="Directory of golden vector files replacing the packaged ones",
    )

    demo = commands.add_parser("demo", parents=[common], help="Run a synthetic training demo")
    demo.add_argument("--rounds", type=int, default=200, help="Rounds M (default: 200)")
    demo.add_argument(
        "--mode",
        type=str,
        choices=["in_process", "tcp"],
        default="in_process",
        help="How clients reach the aggregator (default: in_process)",
    )
    endpoint = demo.add_mutually_exclusive_group()
    endpoint.add_argument(
        "--listen",
        type=str,
        default=None,
        metavar="HOST:PORT",
        help="Run only the aggregator on this endpoint",
    )
    endpoint.add_argument(
        "--connect",
        type=str,
        default=None,
        metavar="HOST:PORT",
        help="Run only the clients, joining the aggregator at this endpoint",
    )
    demo.add_argument(
        "--keys",
        type=Path,
        default=None,
        help="Key directory from keygen (default: deal keys from --seed)",
    )
    demo.add_argument(
        "--client-ids",
        type=str,
        default=None,
        help="Comma-separated subset of clients to run (requires --keys)",
    )
    demo.add_argument(
        "--weights",
        type=str,
        choices=["uniform", "dataset"],
        default="uniform",
        help="Aggregation weights alpha_i (default: uniform)",
    )
    demo.add_argument("--dim", type=int, default=16, help="Model dimension (default: 16)")
    demo.add_argument(
        "--lr", type=float, default=0.05, help="Learning rate (default: 0.05)"
    )
    demo.add_argument(
        "--clip", type=float, default=4.0, help="Public clipping bound c (default: 4.0)"
    )
    demo.add_argument(
        "--status-port",
        type=int,
        default=None,
        help="Serve the read-only status API on this port (tcp aggregator only)",
    )
    demo.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Output directory for trace.csv and loss.dat (default: <data dir>/runs)",
    )

    bench = commands.add_parser("bench", parents=[common], help="Time the encrypted pipeline")
    _add_length_flags(bench)
    bench.add_argument("--reps", type=int, default=1, help="Repetitions (default: 1)")
    bench.add_argument(
        "--unpacked",
        action="store_true",
        help="Benchmark without packing (one data slot per coefficient)",
    )
    bench.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Write the timing rows as CSV to this file",
    )
    return parser


def _add_length_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument(
        "--shape",
        type=str,
        choices=SHAPES,
        default="fcn",
        help="Gradient shape profile (default: fcn)",
    )
    group.add_argument(
        "--length",
        type=int,
        default=None,
        help="Explicit gradient count L, overriding --shape",
    )


# =============================================================================
# Commands
# =============================================================================


def _load_params(args: argparse.Namespace, settings: Settings) -> SchemeParams:
    from esafl.config import profile

    overrides: dict[str, Any] = {}
    if args.clients is not None:
        overrides["num_clients"] = args.clients
    if args.logq0 is not None:
        overrides["log_q0"] = args.logq0
    return profile.load(settings.profile, overrides)


def _run_keygen(args: argparse.Namespace, settings: Settings) -> int:
    from esafl.cli.keygen import cmd_keygen

    out_dir = args.out or settings.data_dir / "keys"
    paths = cmd_keygen(_load_params(args, settings), out_dir, args.seed)
    for path in paths:
        print(path)
    return 0


def _run_estimate(args: argparse.Namespace, settings: Settings) -> int:
    from esafl.cli.estimate import cmd_estimate, format_report
    from esafl.engine.workload import SHAPE_PROFILES

    shape = None if args.length is not None else args.shape
    length = args.length if args.length is not None else SHAPE_PROFILES[args.shape]
    report = cmd_estimate(length, _load_params(args, settings), settings.profile, shape)
    print(format_report(report))
    return 0


def _run_selftest(args: argparse.Namespace, settings: Settings) -> int:
    from esafl.cli import ExitCode
    from esafl.cli.selftest import cmd_selftest

    results = cmd_selftest(
        _load_params(args, settings), args.trials, args.seed, vectors=args.vectors
    )
    for result in results:
        status = "pass" if result.passed else "FAIL"
        print(f"{result.name:<10} {status:<5} {result.seconds:7.2f}s  {result.detail}")
    return ExitCode.OK if all(r.passed for r in results) else ExitCode.TEST_FAILURE


def _run_demo(args: argparse.Namespace, settings: Settings) -> int:
    from esafl.cli import ExitCode
    from esafl.cli.demo import cmd_demo, cmd_listen, format_summary, parse_endpoint
    from esafl.models.training import ExecutionMode, TrainConfig, WeightScheme

    params = _load_params(args, settings)
    if args.listen:
        server = cmd_listen(
            params, settings, args.rounds, parse_endpoint(args.listen), args.status_port
        )
        print(f"aggregated {len(server.aggregator.history)} rounds")
        return ExitCode.OK

    connect = parse_endpoint(args.connect) if args.connect else None
    mode = ExecutionMode.TCP if connect else ExecutionMode(args.mode)
    config = TrainConfig(
        rounds=args.rounds,
        learning_rate=args.lr,
        clip_bound=args.clip,
        num_clients=params.num_clients,
        dim=args.dim,
        weight_scheme=WeightScheme(args.weights),
        seed=args.seed,
        mode=mode,
        host=settings.host,
        round_timeout=settings.round_timeout,
    )
    client_ids = [int(i) for i in args.client_ids.split(",")] if args.client_ids else None
    trace = cmd_demo(
        params,
        config,
        settings=settings,
        out_dir=args.out or settings.data_dir / "runs",
        profile_name=settings.profile,
        keys_dir=args.keys,
        client_ids=client_ids,
        connect=connect,
        status_port=args.status_port,
    )
    print(format_summary(trace))
    return ExitCode.PROTOCOL_ABORT if trace.aborted else ExitCode.OK


def _run_bench(args: argparse.Namespace, settings: Settings) -> int:
    from esafl.cli.bench import cmd_bench
    from esafl.cli.estimate import format_report
    from esafl.store.trace import write_bench

    report = cmd_bench(
        _load_params(args, settings),
        args.shape,
        args.reps,
        args.seed,
        length=args.length,
        profile_name=settings.profile,
        use_unpacked=args.unpacked,
    )
    print(format_report(report))
    if args.out:
        write_bench(report, args.out)
    return 0


COMMANDS = {
    "keygen": _run_keygen,
    "estimate": _run_estimate,
    "selftest": _run_selftest,
    "demo": _run_demo,
    "bench": _run_bench,
}


def main(argv: list[str] | None = None) -> int:
    """Main entry point for the ESAFL CLI."""
    args = build_parser().parse_args(argv)

    # Import here to keep --help fast
    from esafl.cli import exit_code_for
    from esafl.config.settings import Settings, set_settings

    # Start from env-based settings, then override with CLI args
    settings = Settings.from_env()
    updates: dict[str, Any] = {}
    if args.profile is not None:
        updates["profile"] = args.profile
    if args.log_level is not None:
        updates["log_level"] = args.log_level
    settings = settings.model_copy(update=updates)
    set_settings(settings)

    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper()),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        return int(COMMANDS[args.command](args, settings))
    except KeyboardInterrupt:
        return 130
    except Exception as e:
        code = exit_code_for(e)
        if code == 1:
            logger.exception(f"{args.command} failed")
        else:
            logger.error(f"{args.command} failed: {e}")
        return int(code)


if __name__ == "__main__":
    sys.exit(main())
