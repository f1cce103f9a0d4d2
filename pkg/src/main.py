"""GMF partitioning toolkit - Main entry point.

Wires the CLI to the command implementations:
- cli.py: argument parsing and dispatch
- experiments.py: benchmark campaigns and single-model commands
- artifacts.py: output directory handling
"""

import os
from pathlib import Path

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

from .analytics import format_report
from .artifacts import RunArtifacts
from .config import Config
from .exceptions import GMFError
from .experiments import (
    generate_model,
    infer_model,
    partition_model,
    run_bound_campaign,
    run_inference_experiment,
    run_partition_benchmark,
)
from .logger import logger

# =============================================================================
# Sentry Initialization (Error Tracking)
# =============================================================================
SENTRY_DSN = os.getenv("SENTRY_DSN", "")
ENVIRONMENT = os.getenv("ENVIRONMENT", "research")

if SENTRY_DSN:
    sentry_logging = LoggingIntegration(level=None, event_level=None)
    sentry_sdk.init(
        dsn=SENTRY_DSN,
        environment=ENVIRONMENT,
        release="gmf-partition@1.0.0",
        traces_sample_rate=0.0,
        send_default_pii=False,
        integrations=[sentry_logging],
        before_send=lambda event, hint: event if event.get("level") in ("error", "fatal") else None,
    )
    logger.info("sentry.initialized", environment=ENVIRONMENT)


# =============================================================================
# Commands
# =============================================================================
def gen_command(cfg: Config) -> Path:
    return generate_model(cfg, cfg.output.out_dir)


def partition_command(cfg: Config, model_path: str) -> dict:
    return partition_model(cfg, model_path, cfg.output.out_dir)


def infer_command(cfg: Config, model_path: str, partition_path: str) -> dict:
    return infer_model(cfg, model_path, partition_path, cfg.output.out_dir)


def _run_benchmark(cfg: Config, command: str, runner) -> int:
    artifacts = RunArtifacts(cfg.output.out_dir, command=command)
    artifacts.write_resolved_config(cfg)
    try:
        result = runner(cfg, artifacts)
    except GMFError as e:
        artifacts.failed(str(e))
        raise
    status = artifacts.get_status()
    artifacts.finished(failures=len(status["failures"]))
    return result


def bench_gp_command(cfg: Config) -> int:
    def runner(c: Config, artifacts: RunArtifacts) -> int:
        trials, summary = run_partition_benchmark(c, artifacts)
        print(format_report(partition_summary=summary))
        return 0

    return _run_benchmark(cfg, "bench-gp", runner)


def bench_inference_command(cfg: Config) -> int:
    def runner(c: Config, artifacts: RunArtifacts) -> int:
        trials, summary = run_inference_experiment(c, artifacts)
        print(format_report(inference_summary=summary))
        if trials.empty:
            return 0
        # unconverged states are reported, not asserted
        checked = trials[trials["converged"]]
        return 0 if bool(checked["bound_holds"].all()) else 1

    return _run_benchmark(cfg, "bench-inference", runner)


def verify_bounds_command(cfg: Config) -> int:
    def runner(c: Config, artifacts: RunArtifacts) -> int:
        frame = run_bound_campaign(c, artifacts)
        if frame.empty:
            return 1
        checked = frame[frame["converged"]]
        violations = int((~checked["holds"]).sum())
        print(
            f"KL sandwich: {len(checked)}/{len(frame)} converged trials checked, {violations} violations, "
            f"max KL / W = {(checked['kl'] / checked['W'].where(checked['W'] > 0)).max():.4f}"
        )
        return 0 if violations == 0 else 1

    return _run_benchmark(cfg, "verify-bounds", runner)


# =============================================================================
# CLI Entry Point
# =============================================================================
def main(argv: list[str] | None = None) -> int:
    """
    CLI entry point.

    Delegates to cli.py for argument parsing and dispatch.
    """
    from .cli import run_cli

    return run_cli(
        argv,
        gen_fn=gen_command,
        partition_fn=partition_command,
        infer_fn=infer_command,
        bench_gp_fn=bench_gp_command,
        bench_inference_fn=bench_inference_command,
        verify_bounds_fn=verify_bounds_command,
    )


if __name__ == "__main__":
    exit(main())
