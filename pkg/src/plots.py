"""
Figure emission: per-figure data series as CSV plus an SVG rendering.

SVG output is byte-stable for fixed input (fixed hash salt, no date
metadata, Agg backend).
"""

from io import StringIO
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .analytics import PANEL_KEYS, figure_series, summarize_inference_trials  # noqa: E402
from .artifacts import RunArtifacts, frame_to_csv  # noqa: E402
from .logger import logger  # noqa: E402

FIGURES = {
    "fig_l1_error": ("l1_mean", "mean l1 error of P(X_i=+1)"),
    "fig_bound_ratio": ("ratio_mean", "lower bound / log Z"),
}


def _panels(series: pd.DataFrame) -> list[tuple]:
    if series.empty:
        return []
    return list(series[PANEL_KEYS].drop_duplicates().itertuples(index=False, name=None))


def render_svg(series: pd.DataFrame, metric: str, ylabel: str) -> str:
    """One axes per (p, w_obs, w_coup, coupling) panel, one polyline per scheme over k."""
    panels = _panels(series)
    with plt.rc_context({"svg.hashsalt": "gmf-partition", "svg.fonttype": "path"}):
        fig, axes = plt.subplots(1, max(len(panels), 1), figsize=(4.5 * max(len(panels), 1), 3.5), squeeze=False)
        try:
            if not panels:
                ax = axes[0][0]
                ax.set_xlabel("k (number of clusters)")
                ax.set_ylabel(ylabel)
            for ax, panel in zip(axes[0][: len(panels)], panels, strict=True):
                p, w_obs, w_coup, coupling = panel
                subset = series[series[PANEL_KEYS].eq(list(panel), axis="columns").all(axis=1)]
                for scheme, rows in subset.groupby("scheme", sort=True):
                    rows = rows.sort_values("k")
                    style = "--" if scheme == "naive" else "-"
                    ax.plot(rows["k"].to_numpy(), rows[metric].to_numpy(), style, marker="o", label=scheme)
                ax.set_title(f"{coupling}, p={p:g}, w_obs={w_obs:g}, w_coup={w_coup:g}")
                ax.set_xlabel("k (number of clusters)")
                ax.set_ylabel(ylabel)
                ax.legend(fontsize=7)
            fig.tight_layout()

            buffer = StringIO()
            fig.savefig(buffer, format="svg", metadata={"Date": None})
            return buffer.getvalue()
        finally:
            plt.close(fig)


def emit_plots(trials_csv: str | Path, artifacts: RunArtifacts, k_values: list[int] | None = None) -> list[Path]:
    """Write fig_*.csv data series and fig_*.svg renderings from an inference trials CSV."""
    try:
        trials = pd.read_csv(Path(trials_csv))
    except pd.errors.EmptyDataError:
        trials = pd.DataFrame()
    summary = summarize_inference_trials(trials)

    written = []
    for name, (metric, ylabel) in FIGURES.items():
        series = figure_series(summary, metric, k_values)
        written.append(artifacts.write_text(f"{name}.csv", frame_to_csv(series)))
        written.append(artifacts.write_text(f"{name}.svg", render_svg(series, metric, ylabel)))
    logger.info("plots.emitted", files=len(written))
    return written
