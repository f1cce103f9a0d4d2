"""gmf_partition package"""

__all__ = [
    "main",
    "cli",
    "config",
    "logger",
    "exceptions",
    "mrf",
    "oracle",
    "partition",
    "relaxation",
    "rounding",
    "gmf",
    "bounds",
    "analytics",
    "experiments",
    "artifacts",
    "plots",
]
