"""Benchmark orchestration.

Three campaigns, each a map over independent trials:
- partition benchmark: relaxation bound vs rounded cut per (p, k, scheme, rounding)
- inference experiment: l1 error, log Z lower bound and KL sandwich per scheme and k
- bound campaign: KL sandwich at GMF fixed points on small random models

Every trial derives its random streams from (master seed, campaign, indices),
so results do not depend on the number of worker processes.
"""

import itertools
import time
from collections.abc import Callable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
import pandas as pd

from .analytics import (
    NAIVE_SCHEME,
    l1_error,
    lower_bound_ratio,
    summarize_inference_trials,
    summarize_partition_trials,
)
from .artifacts import RunArtifacts, atomic_write_text, frame_to_csv
from .bounds import compute_bound_constants, exploratory_bound_scan, fixed_point_kl, verify_bound
from .config import Config
from .exceptions import GMFError
from .gmf import gmf_lower_bound, run_gmf, save_state, singleton_marginals
from .logger import logger
from .mrf import (
    Coupling,
    MarkovRandomField,
    RandomModelSpec,
    derive_seed,
    generate_random_mrf,
    load_mrf,
    save_mrf,
    treewidth_estimate,
    trial_rng,
)
from .oracle import ExactSummary, exact_summary
from .partition import (
    AffinityScheme,
    Partition,
    build_affinity,
    cut_weight,
    fb_ratio,
    load_partition,
    random_equipartition,
    save_partition,
    singleton_partition,
)
from .relaxation import solve_relaxation
from .rounding import PartitionScheme, Rounding, partition_by_scheme, round_relaxation

PARTITION_CAMPAIGN = 0
INFERENCE_CAMPAIGN = 1
BOUND_CAMPAIGN = 2


@dataclass
class TrialOutcome:
    trial: int
    rows: list[dict] = field(default_factory=list)
    seconds: float = 0.0
    error: str | None = None


def _timed(fn: Callable[[Config, int], list[dict]], config: Config, trial: int) -> TrialOutcome:
    started = time.perf_counter()
    try:
        rows = fn(config, trial)
    except GMFError as e:
        logger.error("experiment.trial_failed", trial=trial, error=str(e))
        return TrialOutcome(trial=trial, seconds=time.perf_counter() - started, error=str(e))
    return TrialOutcome(trial=trial, rows=rows, seconds=time.perf_counter() - started)


def map_trials(fn: Callable[[Config, int], list[dict]], config: Config, trials: int) -> list[TrialOutcome]:
    """Run fn(config, t) for t in range(trials), in order, optionally across processes."""
    job = partial(_timed, fn, config)
    workers = config.experiment.workers
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, range(trials)))
    return [job(t) for t in range(trials)]


def _collect(
    name: str, outcomes: list[TrialOutcome], artifacts: RunArtifacts | None
) -> tuple[pd.DataFrame, pd.DataFrame]:
    rows = [row for o in outcomes for row in o.rows]
    timings = pd.DataFrame([{"experiment": name, "trial": o.trial, "seconds": o.seconds} for o in outcomes])
    if artifacts is not None:
        for o in outcomes:
            if o.error:
                artifacts.failed_trial(o.trial, o.error)
    return pd.DataFrame(rows), timings


def _spec(config: Config, seed: int, p: float, w_obs: float, w_coup: float, coupling: str) -> RandomModelSpec:
    return RandomModelSpec(
        n=config.model.n,
        edge_prob=p,
        w_obs=w_obs,
        w_coup=w_coup,
        coupling=Coupling(coupling),
        seed=seed,
    )


# =============================================================================
# Partition benchmark
# =============================================================================


def partition_trial(config: Config, trial: int) -> list[dict]:
    """All (p, k, scheme, rounding) rows of one trial; one relaxation per (p, k, scheme)."""
    master = config.experiment.seed
    pcfg = config.partition
    m = config.model
    rows = []
    for pi, p in enumerate(m.p):
        seed = derive_seed(master, PARTITION_CAMPAIGN, pi, trial)
        mrf = generate_random_mrf(_spec(config, seed, p, m.w_obs[0], m.w_coup[0], m.coupling[0]))
        for k in config.experiment.k:
            if k < 2:
                continue
            for si, name in enumerate(pcfg.benchmark_schemes):
                scheme = PartitionScheme(name)
                A = build_affinity(mrf, scheme.affinity, pcfg.eps)
                res = solve_relaxation(A, k, scheme.direction, tol=pcfg.tol, max_iters=pcfg.max_iters, solver=pcfg.solver)
                for ri, rounding in enumerate(pcfg.roundings):
                    part = round_relaxation(
                        res,
                        A,
                        rounding,
                        restarts=pcfg.restarts,
                        trials=pcfg.projection_trials,
                        seed=derive_seed(master, PARTITION_CAMPAIGN, pi, trial, k, si, ri),
                    )
                    feasible = cut_weight(A, part)
                    rows.append(
                        {
                            "trial": trial,
                            "seed": seed,
                            "p": p,
                            "n": mrf.n,
                            "edges": mrf.num_edges,
                            "k": k,
                            "scheme": scheme.value,
                            "direction": scheme.direction.value,
                            "rounding": Rounding(rounding).value,
                            "bound": res.bound,
                            "feasible": feasible,
                            "fb": fb_ratio(feasible, res.bound),
                            "solver": res.report.solver,
                            "status": res.report.status,
                            "iterations": res.report.iterations,
                        }
                    )
    return rows


def run_partition_benchmark(
    config: Config, artifacts: RunArtifacts | None = None
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Partition benchmark over config.model.p x experiment.k x benchmark schemes x roundings."""
    config.check_divisibility()
    logger.info(
        "experiment.partition_started",
        trials=config.experiment.trials,
        n=config.model.n,
        k=config.experiment.k,
        workers=config.experiment.workers,
    )
    outcomes = map_trials(partition_trial, config, config.experiment.trials)
    trials, timings = _collect("bench-gp", outcomes, artifacts)
    summary = summarize_partition_trials(trials)

    if artifacts is not None:
        artifacts.write_csv("partition_trials.csv", trials)
        artifacts.write_csv("partition_summary.csv", summary)
        artifacts.write_csv("timings.csv", timings)
        artifacts.write_schema(["partition_trials.csv", "partition_summary.csv", "timings.csv"])
    return trials, summary


# =============================================================================
# Inference experiment
# =============================================================================


def inference_row(
    mrf: MarkovRandomField, exact: ExactSummary, partition: Partition, config: Config
) -> dict:
    """Run GMF on one partition and score it against the exact oracle."""
    state, report = run_gmf(mrf, partition, config.gmf)
    lower = gmf_lower_bound(mrf, state)
    log_z = exact.log_partition
    check = verify_bound(mrf, partition, state, exact)
    return {
        "l1_error": l1_error(singleton_marginals(state), exact.singleton_marginals),
        "lower_bound": lower,
        "log_z": log_z,
        "gap": log_z - lower,
        "ratio": lower_bound_ratio(lower, log_z),
        "kl": check.kl,
        "W": check.report.W,
        "bound_upper": check.upper,
        "bound_holds": check.holds,
        "sweeps": report.sweeps,
        "converged": report.converged,
        "residual": report.residual,
    }


def inference_trial(config: Config, trial: int) -> list[dict]:
    master = config.experiment.seed
    pcfg = config.partition
    rounding = pcfg.roundings[0]
    m = config.model
    panels = itertools.product(m.p, m.w_obs, m.w_coup, m.coupling)

    rows = []
    for panel, (p, w_obs, w_coup, coupling) in enumerate(panels):
        seed = derive_seed(master, INFERENCE_CAMPAIGN, panel, trial)
        mrf = generate_random_mrf(_spec(config, seed, p, w_obs, w_coup, coupling))
        exact = exact_summary(mrf, limit=config.oracle.limit, workers=config.oracle.workers)
        base = {
            "trial": trial,
            "seed": seed,
            "p": p,
            "w_obs": w_obs,
            "w_coup": w_coup,
            "coupling": coupling,
            "treewidth": treewidth_estimate(mrf),
        }

        naive = singleton_partition(mrf.n)
        unit_cut = cut_weight(build_affinity(mrf, AffinityScheme.UNIT), naive)
        rows.append({**base, "scheme": NAIVE_SCHEME, "k": mrf.n, "cut": unit_cut, **inference_row(mrf, exact, naive, config)})

        for k in config.experiment.k:
            for si, name in enumerate(pcfg.schemes):
                outcome = partition_by_scheme(
                    mrf,
                    name,
                    k,
                    seed=derive_seed(master, INFERENCE_CAMPAIGN, panel, trial, k, si),
                    rounding=rounding,
                    restarts=pcfg.restarts,
                    trials=pcfg.projection_trials,
                    tol=pcfg.tol,
                    max_iters=pcfg.max_iters,
                    solver=pcfg.solver,
                    eps=pcfg.eps,
                )
                rows.append(
                    {
                        **base,
                        "scheme": outcome.scheme.value,
                        "k": k,
                        "cut": outcome.feasible,
                        **inference_row(mrf, exact, outcome.partition, config),
                    }
                )
    return rows


def run_inference_experiment(
    config: Config, artifacts: RunArtifacts | None = None
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """GMF under every scheme and k against exact marginals and log Z."""
    config.check_divisibility()
    logger.info(
        "experiment.inference_started",
        trials=config.experiment.trials,
        n=config.model.n,
        schemes=len(config.partition.schemes),
        k=config.experiment.k,
    )
    outcomes = map_trials(inference_trial, config, config.experiment.trials)
    trials, timings = _collect("bench-inference", outcomes, artifacts)
    summary = summarize_inference_trials(trials)

    if artifacts is not None:
        trials_path = artifacts.write_csv("inference_trials.csv", trials)
        artifacts.write_csv("inference_summary.csv", summary)
        artifacts.write_csv("timings.csv", timings)
        names = ["inference_trials.csv", "inference_summary.csv", "timings.csv"]
        if config.output.plots:
            from .plots import emit_plots

            emit_plots(trials_path, artifacts, k_values=config.experiment.k)
            names += ["fig_l1_error.csv", "fig_bound_ratio.csv"]
        artifacts.write_schema(names)
    return trials, summary


# =============================================================================
# Bound campaign
# =============================================================================


def bound_trial(config: Config, trial: int) -> list[dict]:
    """One random small model, random equipartition and GMF fixed point, checked against the sandwich."""
    master = config.experiment.seed
    exp = config.experiment
    rng = trial_rng(master, trial, BOUND_CAMPAIGN)

    n = exp.bound_sizes[trial % len(exp.bound_sizes)]
    coupling = list(Coupling)[(trial // len(exp.bound_sizes)) % len(Coupling)]
    p = float(rng.choice(exp.bound_p))
    w_coup = float(rng.choice(exp.bound_w_coup))
    k = int(rng.choice([2, n // 2]))

    seed = derive_seed(master, BOUND_CAMPAIGN, trial)
    spec = RandomModelSpec(n=n, edge_prob=p, w_obs=config.model.w_obs[0], w_coup=w_coup, coupling=coupling, seed=seed)
    mrf = generate_random_mrf(spec)

    partition = random_equipartition(n, k, derive_seed(master, BOUND_CAMPAIGN, trial, 1))
    state, report = run_gmf(mrf, partition, config.gmf)
    exact = exact_summary(mrf, limit=config.oracle.limit)
    check = verify_bound(mrf, partition, state, exact)

    violations = 0
    if exp.scan_samples:
        scan = exploratory_bound_scan(
            mrf, partition, exact, exp.scan_samples, derive_seed(master, BOUND_CAMPAIGN, trial, 2)
        )
        violations = sum(not r.holds for r in scan)

    return [
        {
            "trial": trial,
            "seed": seed,
            "n": n,
            "p": p,
            "coupling": coupling.value,
            "w_coup": w_coup,
            "k": k,
            "W": check.report.W,
            "kl": check.kl,
            "fixed_point_kl": fixed_point_kl(mrf, state, exact.log_partition),
            "lower": check.lower,
            "upper": check.upper,
            "special_case_bound": check.report.special_case_bound,
            "holds": check.holds,
            "converged": report.converged,
            "sweeps": report.sweeps,
            "scan_violations": violations,
        }
    ]


def run_bound_campaign(config: Config, artifacts: RunArtifacts | None = None) -> pd.DataFrame:
    """KL sandwich verification over experiment.bound_trials random (model, equipartition) pairs."""
    trials = config.experiment.bound_trials
    logger.info("experiment.bounds_started", trials=trials, sizes=config.experiment.bound_sizes)
    outcomes = map_trials(bound_trial, config, trials)
    frame, timings = _collect("verify-bounds", outcomes, artifacts)

    if not frame.empty:
        checked = frame[frame["converged"]]
        logger.info(
            "experiment.bounds_done",
            trials=len(frame),
            converged=len(checked),
            violations=int((~checked["holds"]).sum()),
        )
    if artifacts is not None:
        artifacts.write_csv("bound_trials.csv", frame)
        artifacts.write_csv("timings.csv", timings)
        artifacts.write_schema(["bound_trials.csv", "timings.csv"])
    return frame


# =============================================================================
# Single-model commands
# =============================================================================


def generate_model(config: Config, out_dir: str | Path) -> Path:
    """Sample one model from the first grid point of config.model and save it as model.txt."""
    m = config.model
    spec = _spec(config, config.experiment.seed, m.p[0], m.w_obs[0], m.w_coup[0], m.coupling[0])
    mrf = generate_random_mrf(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return save_mrf(mrf, out / "model.txt")


def partition_model(config: Config, model_path: str | Path, out_dir: str | Path) -> dict:
    """Partition a saved model with the first configured scheme and k; writes partition.txt."""
    mrf = load_mrf(model_path)
    pcfg = config.partition
    outcome = partition_by_scheme(
        mrf,
        pcfg.schemes[0],
        config.experiment.k[0],
        seed=config.experiment.seed,
        rounding=pcfg.roundings[0],
        restarts=pcfg.restarts,
        trials=pcfg.projection_trials,
        tol=pcfg.tol,
        max_iters=pcfg.max_iters,
        solver=pcfg.solver,
        eps=pcfg.eps,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = save_partition(outcome.partition, out / "partition.txt")
    return {
        "path": str(path),
        "scheme": outcome.scheme.value,
        "k": outcome.k,
        "rounding": outcome.rounding,
        "bound": outcome.bound,
        "feasible": outcome.feasible,
        "fb": outcome.fb,
    }


def infer_model(config: Config, model_path: str | Path, partition_path: str | Path, out_dir: str | Path) -> dict:
    """GMF on a saved model and partition; writes state.txt and marginals.csv, scores against the oracle when n allows."""
    mrf = load_mrf(model_path)
    partition = load_partition(partition_path)
    state, report = run_gmf(mrf, partition, config.gmf)
    marginals = singleton_marginals(state)
    bounds = compute_bound_constants(mrf, partition)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_state(state, out / "state.txt")
    frame = pd.DataFrame({"node": np.arange(mrf.n), "p_plus": marginals})

    result = {
        "sweeps": report.sweeps,
        "converged": report.converged,
        "residual": report.residual,
        "lower_bound": gmf_lower_bound(mrf, state),
        "W": bounds.W,
        "upper": bounds.upper,
    }
    if mrf.n <= config.oracle.limit:
        exact = exact_summary(mrf, limit=config.oracle.limit, workers=config.oracle.workers)
        check = verify_bound(mrf, partition, state, exact)
        frame["p_plus_exact"] = exact.singleton_marginals
        result.update(
            log_z=exact.log_partition,
            l1_error=l1_error(marginals, exact.singleton_marginals),
            kl=check.kl,
            holds=check.holds,
        )

    atomic_write_text(out / "marginals.csv", frame_to_csv(frame))
    return result
