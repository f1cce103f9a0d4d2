"""
Analytics and reporting for benchmark trials.
Turns per-trial records into the partition table and the figure series.
"""

import numpy as np
import pandas as pd

from .constants import LOG_Z_RATIO_MIN
from .exceptions import ValidationError

NAIVE_SCHEME = "naive"
PANEL_KEYS = ["p", "w_obs", "w_coup", "coupling"]


def l1_error(approx, exact) -> float:
    """Mean over nodes of |P^(X_i=+1) - P(X_i=+1)|."""
    a = np.asarray(approx, dtype=np.float64)
    b = np.asarray(exact, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValidationError("Marginal vectors must be non-empty and of equal length", {"approx": a.shape, "exact": b.shape})
    return float(np.mean(np.abs(a - b)))


def lower_bound_ratio(bound: float, log_z: float) -> float:
    """bound / log Z, NaN when |log Z| is too small for the ratio to mean anything."""
    if abs(log_z) <= LOG_Z_RATIO_MIN:
        return float("nan")
    return bound / log_z


def _std(series: pd.Series) -> float:
    return float(series.std(ddof=1)) if series.size > 1 else 0.0


def summarize_partition_trials(trials: pd.DataFrame) -> pd.DataFrame:
    """Mean bound, mean feasible cut and mean +/- std of f/b per (p, k, scheme, rounding)."""
    keys = ["p", "k", "scheme", "direction", "rounding"]
    if trials.empty:
        return pd.DataFrame(columns=[*keys, "trials", "bound_mean", "feasible_mean", "fb_mean", "fb_std"])
    grouped = trials.groupby(keys, sort=True)
    summary = grouped.agg(
        trials=("trial", "size"),
        bound_mean=("bound", "mean"),
        feasible_mean=("feasible", "mean"),
        fb_mean=("fb", "mean"),
    ).reset_index()
    summary["fb_std"] = grouped["fb"].apply(_std).to_numpy()
    return summary


def summarize_inference_trials(trials: pd.DataFrame) -> pd.DataFrame:
    """Per panel, scheme and k: mean/std of l1 error, mean bound gap and ratio, bound checks."""
    keys = [*PANEL_KEYS, "scheme", "k"]
    columns = [*keys, "trials", "l1_mean", "l1_std", "gap_mean", "ratio_mean", "kl_mean", "bound_holds", "converged"]
    if trials.empty:
        return pd.DataFrame(columns=columns)
    grouped = trials.groupby(keys, sort=True)
    summary = grouped.agg(
        trials=("trial", "size"),
        l1_mean=("l1_error", "mean"),
        gap_mean=("gap", "mean"),
        ratio_mean=("ratio", "mean"),
        kl_mean=("kl", "mean"),
        bound_holds=("bound_holds", "all"),
        converged=("converged", "all"),
    ).reset_index()
    summary["l1_std"] = grouped["l1_error"].apply(_std).to_numpy()
    return summary[columns]


def figure_series(summary: pd.DataFrame, metric: str, k_values: list[int] | None = None) -> pd.DataFrame:
    """
    Long-format plot data: one row per (panel, scheme, k).

    The naive mean-field baseline has a single k (= n); it is repeated at
    every k of the partition schemes so it draws as a flat reference line.
    """
    columns = [*PANEL_KEYS, "scheme", "k", metric]
    if summary.empty:
        return pd.DataFrame(columns=columns)

    naive = summary[summary["scheme"] == NAIVE_SCHEME]
    schemes = summary[summary["scheme"] != NAIVE_SCHEME]
    ks = sorted(k_values if k_values is not None else schemes["k"].unique().tolist())

    rows = [schemes[columns]]
    for k in ks:
        baseline = naive[columns].copy()
        baseline["k"] = k
        rows.append(baseline)
    series = pd.concat(rows, ignore_index=True)
    return series.sort_values([*PANEL_KEYS, "scheme", "k"], kind="mergesort").reset_index(drop=True)


def scheme_ranking(summary: pd.DataFrame, metric: str) -> list[str]:
    """Schemes ordered by their mean `metric` over all panels and k, best (smallest) first."""
    means = summary.groupby("scheme")[metric].mean().sort_values(kind="mergesort")
    return means.index.tolist()


def format_report(partition_summary: pd.DataFrame | None = None, inference_summary: pd.DataFrame | None = None) -> str:
    """Human-readable digest printed at the end of a benchmark."""
    lines = []
    if partition_summary is not None and not partition_summary.empty:
        lines.append("Partition benchmark (f/b = feasible cut / relaxation bound)")
        for row in partition_summary.itertuples(index=False):
            lines.append(
                f"  p={row.p:g} k={row.k} {row.scheme}/{row.rounding}: "
                f"bound {row.bound_mean:.1f}  feasible {row.feasible_mean:.1f}  f/b {row.fb_mean:.2f}+/-{row.fb_std:.2f}"
            )
    if inference_summary is not None and not inference_summary.empty:
        lines.append("Inference (mean l1 error of singleton marginals, mean log Z gap)")
        for row in inference_summary.itertuples(index=False):
            lines.append(
                f"  p={row.p:g} w_obs={row.w_obs:g} w_coup={row.w_coup:g} {row.coupling} {row.scheme} k={row.k}: "
                f"l1 {row.l1_mean:.4f}  gap {row.gap_mean:.4f}  bound ok: {bool(row.bound_holds)}"
            )
    return "\n".join(lines)
