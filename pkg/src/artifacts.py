"""
Output directory management for benchmark runs.
Atomic CSV writes, resolved config copy, column schema and a run status file.
"""

import json
from datetime import datetime
from pathlib import Path

import pandas as pd
import yaml

from .config import Config
from .constants import CSV_FLOAT_FORMAT
from .exceptions import SerializationError
from .logger import logger

STATUS_FILE = "run_status.json"

# Column documentation written to schema.yaml next to the CSVs
SCHEMA: dict[str, dict[str, str]] = {
    "partition_trials.csv": {
        "trial": "trial index",
        "seed": "model seed derived from (master seed, p index, trial)",
        "p": "edge probability",
        "n": "node count",
        "edges": "edge count of the sampled graph",
        "k": "cluster count",
        "scheme": "partition scheme (direction_affinity)",
        "direction": "min or max",
        "rounding": "kmeans or rp",
        "bound": "SDP relaxation bound on the cut",
        "feasible": "cut of the rounded equipartition",
        "fb": "feasible / bound (1 when both are 0)",
        "solver": "cvxpy solver used",
        "status": "solver status",
        "iterations": "solver iterations",
    },
    "partition_summary.csv": {
        "p": "edge probability",
        "k": "cluster count",
        "scheme": "partition scheme",
        "direction": "min or max",
        "rounding": "kmeans or rp",
        "trials": "number of trials",
        "bound_mean": "mean relaxation bound",
        "feasible_mean": "mean feasible cut",
        "fb_mean": "mean f/b",
        "fb_std": "sample std of f/b",
    },
    "inference_trials.csv": {
        "trial": "trial index",
        "seed": "model seed",
        "p": "edge probability",
        "w_obs": "singleton parameter range",
        "w_coup": "coupling range",
        "coupling": "attractive, repulsive or mixed",
        "treewidth": "min-fill-in treewidth estimate",
        "scheme": "partition scheme, or naive for singleton clusters",
        "k": "cluster count",
        "cut": "cut weight in the scheme's own affinity",
        "l1_error": "mean |P^(X_i=+1) - P(X_i=+1)|",
        "lower_bound": "E_q[log p~] + H(q)",
        "log_z": "exact log partition function",
        "gap": "log_z - lower_bound",
        "ratio": "lower_bound / log_z, empty when |log_z| <= 0.5",
        "kl": "exact KL(q || p)",
        "W": "sum of |theta| over cut edges",
        "bound_upper": "b * W",
        "bound_holds": "a*W <= KL <= b*W within slack",
        "sweeps": "GMF sweeps used",
        "converged": "GMF converged within max_sweeps",
        "residual": "final max change of P(X_i=+1)",
    },
    "inference_summary.csv": {
        "p": "edge probability",
        "w_obs": "singleton parameter range",
        "w_coup": "coupling range",
        "coupling": "attractive, repulsive or mixed",
        "scheme": "partition scheme",
        "k": "cluster count",
        "trials": "number of trials",
        "l1_mean": "mean l1 error",
        "l1_std": "sample std of l1 error",
        "gap_mean": "mean log Z gap",
        "ratio_mean": "mean lower bound ratio over trials where it is defined",
        "kl_mean": "mean exact KL",
        "bound_holds": "bound held on every trial",
        "converged": "GMF converged on every trial",
    },
    "bound_trials.csv": {
        "trial": "trial index",
        "seed": "model seed",
        "n": "node count",
        "p": "edge probability",
        "coupling": "attractive, repulsive or mixed",
        "w_coup": "coupling range",
        "k": "cluster count",
        "W": "sum of |theta| over cut edges",
        "kl": "exact KL(q || p) at the GMF fixed point",
        "fixed_point_kl": "KL from the fixed-point form",
        "lower": "a * W",
        "upper": "b * W",
        "special_case_bound": "k * delta_phi * W",
        "holds": "a*W <= KL <= b*W within slack",
        "converged": "GMF converged",
        "sweeps": "GMF sweeps used",
        "scan_violations": "random product states outside the sandwich (informational)",
    },
    "fig_l1_error.csv": {"scheme": "series", "k": "x", "l1_mean": "y"},
    "fig_bound_ratio.csv": {"scheme": "series", "k": "x", "ratio_mean": "y"},
    "timings.csv": {"experiment": "benchmark name", "trial": "trial index", "seconds": "wall time of the trial"},
}


def atomic_write_text(path: Path, text: str) -> Path:
    """Write to a temp file, then rename over the target."""
    temp_file = path.with_suffix(path.suffix + ".tmp")
    try:
        temp_file.write_text(text)
        temp_file.replace(path)
    except OSError as e:
        raise SerializationError(f"Failed to write {path}", original_error=e) from e
    return path


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


class RunArtifacts:
    """
    One benchmark output directory.

    Usage:
        artifacts = RunArtifacts("results", command="bench-gp")
        artifacts.write_csv("partition_trials.csv", frame)
        artifacts.finished(trials=30)
    """

    def __init__(self, out_dir: str | Path, command: str):
        self.out_dir = Path(out_dir)
        self.command = command
        self._ensure_dir()
        self._status = {
            "status": "running",
            "command": command,
            "started_at": datetime.now().isoformat(),
            "finished_at": None,
            "files": [],
            "counts": {},
            "failures": [],
        }
        self._write_status()

    def _ensure_dir(self):
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise SerializationError(f"Cannot create output directory {self.out_dir}", original_error=e) from e
        logger.debug("artifacts.dir_ready", path=str(self.out_dir))

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def _write_status(self):
        try:
            atomic_write_text(self.path(STATUS_FILE), json.dumps(self._status, indent=2))
        except SerializationError as e:
            logger.warning("artifacts.status_write_failed", error=str(e))

    def _record(self, name: str):
        if name not in self._status["files"]:
            self._status["files"].append(name)

    def write_text(self, name: str, text: str) -> Path:
        path = atomic_write_text(self.path(name), text)
        self._record(name)
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.write_text(name, frame_to_csv(frame))
        logger.info("artifacts.csv_written", file=name, rows=len(frame))
        return path

    def write_resolved_config(self, config: Config) -> Path:
        return self.write_text("resolved_config.yaml", config.to_yaml())

    def write_schema(self, names: list[str]) -> Path:
        schema = {name: SCHEMA[name] for name in names if name in SCHEMA}
        return self.write_text("schema.yaml", yaml.safe_dump(schema, sort_keys=False))

    def failed_trial(self, trial: int, error: str):
        self._status["failures"].append({"trial": trial, "message": error[:200]})
        self._write_status()

    def finished(self, **counts):
        self._status["status"] = "failed" if self._status["failures"] else "completed"
        self._status["finished_at"] = datetime.now().isoformat()
        self._status["counts"].update(counts)
        self._write_status()
        logger.info("artifacts.run_finished", command=self.command, status=self._status["status"], **counts)

    def failed(self, error: str):
        self._status["status"] = "failed"
        self._status["finished_at"] = datetime.now().isoformat()
        self._status["last_error"] = error[:200]
        self._write_status()
        logger.error("artifacts.run_failed", command=self.command, error=error[:100])

    def get_status(self) -> dict:
        return json.loads(json.dumps(self._status))
