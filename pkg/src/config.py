import os
from pathlib import Path
from typing import Literal

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

from .constants import (
    CLUSTER_SIZE_CAP,
    DEFAULT_SEED,
    ENUMERATION_LIMIT,
    GMF_DAMPING,
    GMF_MAX_SWEEPS,
    GMF_TOL,
    INVERSE_COUPLING_EPS,
    KMEANS_RESTARTS,
    PROJECTION_TRIALS,
    RELAXATION_MAX_ITERS,
    RELAXATION_TOL,
)
from .exceptions import ConfigError

load_dotenv()

SCHEMES = ("minc_unit", "minc_coupling", "minc_inverse", "maxc_unit", "maxc_coupling", "maxc_inverse", "random")


class ModelConfig(BaseModel):
    """Random model ranges; list-valued fields form a grid of panels."""

    n: int = Field(default=24, ge=1)
    p: list[float] = Field(default_factory=lambda: [0.3])
    w_obs: list[float] = Field(default_factory=lambda: [0.1])
    w_coup: list[float] = Field(default_factory=lambda: [1.0])
    coupling: list[Literal["attractive", "repulsive", "mixed"]] = Field(default_factory=lambda: ["mixed"])

    @field_validator("p", "w_obs", "w_coup", "coupling", mode="before")
    @classmethod
    def as_list(cls, v):
        return v if isinstance(v, list) else [v]

    @field_validator("p")
    @classmethod
    def validate_p(cls, v: list[float]) -> list[float]:
        if not v or any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError("Edge probabilities must lie in [0, 1]")
        return v

    @field_validator("w_obs", "w_coup")
    @classmethod
    def validate_weights(cls, v: list[float]) -> list[float]:
        if not v or any(w < 0 for w in v):
            raise ValueError("Weight ranges must be non-negative")
        return v

    @field_validator("coupling")
    @classmethod
    def validate_coupling(cls, v: list[str]) -> list[str]:
        if not v:
            raise ValueError("At least one coupling type is required")
        return v


class PartitionConfig(BaseModel):
    schemes: list[str] = Field(default_factory=lambda: list(SCHEMES))
    benchmark_schemes: list[str] = Field(
        default_factory=lambda: ["minc_unit", "maxc_unit"], description="Schemes of the partition benchmark"
    )
    roundings: list[Literal["kmeans", "rp"]] = Field(default_factory=lambda: ["kmeans", "rp"])
    restarts: int = Field(default=KMEANS_RESTARTS, ge=1)
    projection_trials: int = Field(default=PROJECTION_TRIALS, ge=1)
    tol: float = Field(default=RELAXATION_TOL, gt=0)
    max_iters: int = Field(default=RELAXATION_MAX_ITERS, ge=1)
    solver: str | None = Field(default=None, description="cvxpy solver name; Clarabel, then SCS when unset")
    eps: float = Field(default=INVERSE_COUPLING_EPS, gt=0)

    @field_validator("schemes", "benchmark_schemes")
    @classmethod
    def validate_schemes(cls, v: list[str]) -> list[str]:
        unknown = [s for s in v if s not in SCHEMES]
        if unknown:
            raise ValueError(f"Unknown partition schemes: {unknown}")
        return v

    @field_validator("benchmark_schemes")
    @classmethod
    def no_random_benchmark(cls, v: list[str]) -> list[str]:
        if "random" in v:
            raise ValueError("The random scheme has no relaxation to benchmark")
        return v


class GmfConfig(BaseModel):
    tol: float = Field(default=GMF_TOL, gt=0)
    max_sweeps: int = Field(default=GMF_MAX_SWEEPS, ge=1)
    damping: float = Field(default=GMF_DAMPING, ge=0.0, lt=1.0)
    init: Literal["uniform", "random"] = "uniform"
    seed: int = Field(default=0, ge=0, description="Seed of the random table initialization")
    cluster_cap: int = Field(default=CLUSTER_SIZE_CAP, ge=1, le=24)


class OracleConfig(BaseModel):
    limit: int = Field(default=ENUMERATION_LIMIT, ge=1, le=40)
    workers: int = Field(default=1, ge=1)


class ExperimentConfig(BaseModel):
    seed: int = Field(default=DEFAULT_SEED, ge=0)
    trials: int = Field(default=20, ge=1)
    k: list[int] = Field(default_factory=lambda: [3, 4, 6, 8])
    workers: int = Field(default=1, ge=1, description="Processes running trials in parallel")
    bound_sizes: list[int] = Field(default_factory=lambda: [10, 12, 14])
    bound_trials: int = Field(default=200, ge=1)
    bound_w_coup: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    bound_p: list[float] = Field(default_factory=lambda: [0.3, 0.5])
    scan_samples: int = Field(default=5, ge=0, description="Random product states checked per bound trial")

    @field_validator("k")
    @classmethod
    def validate_k(cls, v: list[int]) -> list[int]:
        if not v or any(k < 1 for k in v):
            raise ValueError("Cluster counts must be positive")
        return v


class OutputConfig(BaseModel):
    out_dir: str = "results"
    plots: bool = True
    log_to_file: bool = True


class Config(BaseModel):
    model: ModelConfig = Field(default_factory=ModelConfig)
    partition: PartitionConfig = Field(default_factory=PartitionConfig)
    gmf: GmfConfig = Field(default_factory=GmfConfig)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    log_level: str = Field(default="INFO")

    def check_divisibility(self) -> None:
        """Benchmarks need every requested k to divide n."""
        bad = [k for k in self.experiment.k if self.model.n % k]
        if bad:
            raise ConfigError("Cluster counts do not divide the node count", {"n": self.model.n, "k": bad})

    @classmethod
    def default(cls) -> "Config":
        return cls.from_dict({})

    @classmethod
    def from_dict(cls, raw: dict) -> "Config":
        raw = _apply_env(raw)
        try:
            return cls(**raw)
        except Exception as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def load(cls, path: str = "config.example.yaml") -> "Config":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"Config file not found: {path}")

        try:
            raw = yaml.safe_load(p.read_text()) or {}
        except Exception as e:
            raise ConfigError(f"Failed to parse YAML: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError("Config file must contain a mapping of sections")

        return cls.from_dict(raw)

    def with_overrides(self, **sections: dict) -> "Config":
        """Copy with per-section overrides, e.g. with_overrides(model={"n": 12}); None values are skipped."""
        raw = self.model_dump()
        for section, values in sections.items():
            if isinstance(values, dict):
                raw.setdefault(section, {}).update({k: v for k, v in values.items() if v is not None})
            elif values is not None:
                raw[section] = values
        try:
            return Config(**raw)
        except Exception as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(), sort_keys=False)


def _apply_env(raw: dict) -> dict:
    """Environment variable overrides"""
    raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
    if seed := os.getenv("GMF_SEED"):
        raw.setdefault("experiment", {})["seed"] = seed
    if trials := os.getenv("GMF_TRIALS"):
        raw.setdefault("experiment", {})["trials"] = trials
    if workers := os.getenv("GMF_WORKERS"):
        raw.setdefault("experiment", {})["workers"] = workers
    if out_dir := os.getenv("GMF_OUT_DIR"):
        raw.setdefault("output", {})["out_dir"] = out_dir
    if level := os.getenv("GMF_LOG_LEVEL"):
        raw["log_level"] = level
    return raw
