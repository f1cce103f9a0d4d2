"""CLI entry point for the GMF partitioning toolkit.

This module handles argument parsing, config resolution and command dispatch.
The commands themselves are injected so tests can stub them.
"""

import argparse
from collections.abc import Callable
from pathlib import Path

from .config import SCHEMES, Config
from .exceptions import GMFError
from .logger import logger, set_run_id, setup_logger

COMMANDS = ("gen", "partition", "infer", "bench-gp", "bench-inference", "verify-bounds")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML config file (default: built-in desk-scale config)")
    common.add_argument("--seed", type=int, default=None, help="Master seed")
    common.add_argument("--out", default=None, metavar="DIR", help="Output directory (default: results)")
    common.add_argument("--trials", type=int, default=None, help="Number of trials")
    common.add_argument("--k", type=int, nargs="+", default=None, help="Cluster count(s)")
    common.add_argument("--scheme", nargs="+", choices=SCHEMES, default=None, help="Partition scheme(s)")
    common.add_argument("--n", type=int, default=None, help="Number of nodes")
    common.add_argument("--p", type=float, nargs="+", default=None, help="Edge probability (or several)")
    common.add_argument(
        "--coupling", nargs="+", choices=("attractive", "repulsive", "mixed"), default=None, help="Coupling type(s)"
    )
    common.add_argument("--w-obs", type=float, nargs="+", default=None, help="Singleton parameter range")
    common.add_argument("--w-coup", type=float, nargs="+", default=None, help="Coupling parameter range")
    common.add_argument("--tol", type=float, default=None, help="GMF convergence tolerance")
    common.add_argument("--workers", type=int, default=None, help="Worker processes for trials")
    common.add_argument("--log-level", default=None, choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return common


def create_parser() -> argparse.ArgumentParser:
    """Create and configure argument parser."""
    parser = argparse.ArgumentParser(
        prog="gmf-partition",
        description="Generalized mean field inference with graph-partitioned clusters",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m src.main gen --n 24 --p 0.3 --out work            Sample a model
  python -m src.main partition work/model.txt --k 4 --scheme minc_coupling --out work
  python -m src.main infer work/model.txt work/partition.txt --out work
  python -m src.main bench-gp --trials 30 --out results/gp    Partition table
  python -m src.main bench-inference --out results/inf        Error and lower-bound curves
  python -m src.main verify-bounds --trials 200               KL sandwich campaign
        """,
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen", parents=[common], help="Sample a random model and write model.txt")

    part = sub.add_parser("partition", parents=[common], help="Partition a model file and write partition.txt")
    part.add_argument("model", help="Model file")

    infer = sub.add_parser("infer", parents=[common], help="Run GMF on a model and partition")
    infer.add_argument("model", help="Model file")
    infer.add_argument("partition", help="Partition file")

    sub.add_parser("bench-gp", parents=[common], help="Relaxation bound vs rounded cut benchmark")
    sub.add_parser("bench-inference", parents=[common], help="Marginal error and log Z lower bound per scheme")
    sub.add_parser("verify-bounds", parents=[common], help="KL sandwich verification campaign")
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    """Config file (or defaults), then environment, then CLI flags."""
    cfg = Config.load(args.config) if args.config else Config.default()
    experiment = {"seed": args.seed, "k": args.k, "workers": args.workers}
    if args.command == "verify-bounds":
        experiment["bound_trials"] = args.trials
    else:
        experiment["trials"] = args.trials
    return cfg.with_overrides(
        model={"n": args.n, "p": args.p, "coupling": args.coupling, "w_obs": args.w_obs, "w_coup": args.w_coup},
        partition={"schemes": args.scheme},
        gmf={"tol": args.tol},
        experiment=experiment,
        output={"out_dir": args.out},
        log_level=args.log_level,
    )


def run_cli(
    argv: list[str] | None = None,
    *,
    gen_fn: Callable[[Config], Path],
    partition_fn: Callable[[Config, str], dict],
    infer_fn: Callable[[Config, str, str], dict],
    bench_gp_fn: Callable[[Config], int],
    bench_inference_fn: Callable[[Config], int],
    verify_bounds_fn: Callable[[Config], int],
) -> int:
    """
    Parse arguments and dispatch to the command functions.

    Args:
        argv: Command line arguments (None for sys.argv)
        gen_fn: Writes a sampled model, returns its path
        partition_fn: Partitions a model file, returns partition statistics
        infer_fn: Runs GMF on model + partition files, returns the inference report
        bench_gp_fn, bench_inference_fn, verify_bounds_fn: Benchmarks, return an exit code

    Returns:
        Exit code (0 for success, 1 for toolkit errors, 130 on interrupt)
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    try:
        cfg = resolve_config(args)
        log_dir = cfg.output.out_dir if cfg.output.log_to_file and args.command.startswith(("bench", "verify")) else None
        setup_logger(cfg.log_level, log_dir=log_dir)
        rid = set_run_id()
        logger.info("cli.start", command=args.command, run=rid, seed=cfg.experiment.seed)

        if args.command == "gen":
            path = gen_fn(cfg)
            print(f"model written to {path}")
            return 0

        if args.command == "partition":
            stats = partition_fn(cfg, args.model)
            print(" ".join(f"{k}={v}" for k, v in stats.items()))
            return 0

        if args.command == "infer":
            report = infer_fn(cfg, args.model, args.partition)
            print(" ".join(f"{k}={v}" for k, v in report.items()))
            return 0

        if args.command == "bench-gp":
            return bench_gp_fn(cfg)

        if args.command == "bench-inference":
            return bench_inference_fn(cfg)

        return verify_bounds_fn(cfg)

    except KeyboardInterrupt:
        print("\nInterrupted by user")
        return 130

    except GMFError as e:
        logger.error("cli.failed", command=args.command, error=str(e))
        print(f"error: {e}")
        return 1

    except Exception as e:
        logger.exception("cli.fatal_error", command=args.command)
        print(f"fatal error: {e}")
        return 1
