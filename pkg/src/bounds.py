"""
KL sandwich a*W <= KL(q || p) <= b*W for GMF approximations.

Weights are taken as |theta| with the sign folded into the potential, so a
cut spin pair always has phi in [-1, 1]. W sums |theta| over the cut
cliques; the constants only depend on the border cliques, never on the
potentials inside clusters.
"""

from dataclasses import dataclass

import numpy as np

from .constants import BOUND_SLACK
from .gmf import GmfState, build_neighborhoods, log_partition_of_state
from .logger import logger
from .mrf import MarkovRandomField, derive_seed
from .oracle import ExactSummary, exact_kl_of_product
from .partition import Partition


@dataclass(frozen=True)
class BorderClique:
    """A cut clique: its nodes, positive weight, cluster count and potential range."""

    nodes: tuple[int, ...]
    weight: float
    k_beta: int
    phi_min: float = -1.0
    phi_max: float = 1.0


@dataclass(frozen=True)
class BoundReport:
    W: float
    a_phi: float
    b_phi: float
    a_Z: float
    b_Z: float
    a: float
    b: float
    special_case_bound: float
    border_count: int

    @property
    def lower(self) -> float:
        return self.a * self.W

    @property
    def upper(self) -> float:
        return self.b * self.W


def border_cliques(mrf: MarkovRandomField, partition: Partition) -> list[BorderClique]:
    """Cut edges of the partition as border cliques, in edge order."""
    if mrf.num_edges == 0:
        return []
    assign = partition.assignment
    cut = np.flatnonzero(assign[mrf.edges[:, 0]] != assign[mrf.edges[:, 1]])
    return [
        BorderClique(
            nodes=(int(mrf.edges[e, 0]), int(mrf.edges[e, 1])),
            weight=float(abs(mrf.theta_edge[e])),
            k_beta=len({int(assign[v]) for v in mrf.edges[e]}),
        )
        for e in cut
    ]


def bound_constants(cliques: list[BorderClique]) -> BoundReport:
    """Sandwich constants from per-clique (k_beta, phi_min, phi_max) records."""
    W = float(sum(c.weight for c in cliques))
    if not cliques:
        return BoundReport(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0)

    a_phi = min((c.k_beta - 1) * c.phi_min for c in cliques)
    b_phi = max((c.k_beta - 1) * c.phi_max for c in cliques)
    b_Z = max(c.k_beta * c.phi_max - c.phi_min for c in cliques)
    a_Z = min((c.k_beta - 1) * c.phi_min + (c.phi_min - c.phi_max) for c in cliques)
    a = max(0.0, a_phi - b_Z)
    b = b_phi - a_Z

    special = float("nan")
    k_values = {c.k_beta for c in cliques}
    if len(k_values) == 1:
        delta = max(c.phi_max for c in cliques) - min(c.phi_min for c in cliques)
        special = k_values.pop() * delta * W

    return BoundReport(
        W=W,
        a_phi=float(a_phi),
        b_phi=float(b_phi),
        a_Z=float(a_Z),
        b_Z=float(b_Z),
        a=float(a),
        b=float(b),
        special_case_bound=float(special),
        border_count=len(cliques),
    )


def compute_bound_constants(mrf: MarkovRandomField, partition: Partition) -> BoundReport:
    """W and the sandwich constants for a pairwise spin model (upper bound 4W)."""
    return bound_constants(border_cliques(mrf, partition))


@dataclass(frozen=True)
class BoundCheck:
    kl: float
    lower: float
    upper: float
    holds: bool
    report: BoundReport


def verify_bound(
    mrf: MarkovRandomField,
    partition: Partition,
    state: GmfState,
    oracle: ExactSummary,
    slack: float = BOUND_SLACK,
) -> BoundCheck:
    """Check a*W - slack <= KL(q || p) <= b*W + slack against the exact oracle."""
    report = compute_bound_constants(mrf, partition)
    kl = exact_kl_of_product(mrf, state, oracle.log_partition)
    holds = report.lower - slack <= kl <= report.upper + slack
    if not holds:
        logger.warning("bounds.violated", kl=kl, lower=report.lower, upper=report.upper, W=report.W)
    return BoundCheck(kl=kl, lower=report.lower, upper=report.upper, holds=holds, report=report)


def fixed_point_kl(mrf: MarkovRandomField, state: GmfState, log_z: float) -> float:
    """
    KL from the fixed-point form

        sum_cut theta_b (k_b - 1) <phi_b>_q - log Z_q + log Z_p

    Only equal to the true KL when `state` is a GMF fixed point.
    """
    means = state.node_means()
    cut_term = 0.0
    for nb in build_neighborhoods(mrf, state.partition):
        # Each cut edge is seen from both sides; count it once from the lower cluster
        for e, outside in zip(nb.border_edges, nb.border_outside, strict=True):
            if state.partition.assignment[outside] > nb.cluster:
                i, j = mrf.edges[e]
                cut_term += mrf.theta_edge[e] * means[i] * means[j]
    return float(cut_term - log_partition_of_state(mrf, state) + log_z)


@dataclass(frozen=True)
class ScanRecord:
    sample: int
    kl: float
    lower: float
    upper: float
    holds: bool


def exploratory_bound_scan(
    mrf: MarkovRandomField,
    partition: Partition,
    oracle: ExactSummary,
    samples: int,
    seed: int,
) -> list[ScanRecord]:
    """
    Evaluate the sandwich for arbitrary normalized product distributions.

    Violations are recorded, not raised: the sandwich is only guaranteed at a
    GMF fixed point.
    """
    report = compute_bound_constants(mrf, partition)
    records = []
    for s in range(samples):
        state = GmfState.random(partition, seed=derive_seed(seed, s), mix=1.0)
        kl = exact_kl_of_product(mrf, state, oracle.log_partition)
        holds = report.lower - BOUND_SLACK <= kl <= report.upper + BOUND_SLACK
        records.append(ScanRecord(sample=s, kl=kl, lower=report.lower, upper=report.upper, holds=holds))

    violations = sum(not r.holds for r in records)
    logger.info("bounds.scan", samples=samples, violations=violations, W=round(report.W, 6))
    return records
