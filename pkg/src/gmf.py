"""
Generalized mean field (GMF) inference over disjoint variable clusters.

The approximation q(x) = prod_c q_c(x_C) keeps one dense probability table
per cluster. Table index bit j corresponds to the j-th node of the cluster
(ascending node id); a set bit means spin +1.

A cluster update sets

    q_c(x_C) ~ exp{ sum_internal theta_a phi_a(x) + sum_border theta_b phi'_b(x_C) }

where the peripheral potential phi'_b of a cut edge (i, j), i in C, is
x_i * <x_j> under the table holding j. Sweeps visit clusters in ascending
order until node marginals move less than `tol`.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import entr, logsumexp

from .config import GmfConfig
from .constants import (
    CLUSTER_SIZE_CAP,
    LOG_ZERO_FLOOR,
    MODEL_FLOAT_FORMAT,
    NORMALIZATION_TOL,
    RANDOM_INIT_CONCENTRATION,
    RANDOM_INIT_MIX,
)
from .exceptions import CapacityError, NormalizationError, SerializationError, ValidationError
from .logger import logger
from .mrf import MarkovRandomField
from .partition import Partition


@lru_cache(maxsize=None)
def local_spins(m: int) -> np.ndarray:
    """All 2^m spin configurations of a cluster, row s holding the bits of s as +/-1."""
    bits = (np.arange(2**m)[:, None] >> np.arange(m)[None, :]) & 1
    spins = 2.0 * bits - 1.0
    spins.setflags(write=False)
    return spins


# =============================================================================
# State
# =============================================================================


@dataclass
class GmfState:
    """Cluster marginal tables of a GMF approximation."""

    partition: Partition
    tables: list[np.ndarray]

    def __post_init__(self):
        if len(self.tables) != self.partition.k:
            raise ValidationError("One table per cluster required", {"k": self.partition.k, "got": len(self.tables)})
        for c, (nodes, table) in enumerate(zip(self.partition.clusters, self.tables, strict=True)):
            if np.shape(table) != (2 ** len(nodes),):
                raise ValidationError("Table size must be 2^cluster_size", {"cluster": c, "size": len(nodes)})
        self.tables = [np.asarray(t, dtype=np.float64) for t in self.tables]

    @classmethod
    def uniform(cls, partition: Partition) -> "GmfState":
        return cls(partition, [np.full(2 ** len(c), 2.0 ** -len(c)) for c in partition.clusters])

    @classmethod
    def random(
        cls,
        partition: Partition,
        seed: int,
        concentration: float = RANDOM_INIT_CONCENTRATION,
        mix: float = RANDOM_INIT_MIX,
    ) -> "GmfState":
        """Uniform tables perturbed by independent Dirichlet draws (one stream per seed)."""
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        tables = []
        for c in partition.clusters:
            size = 2 ** len(c)
            draw = rng.dirichlet(np.full(size, concentration))
            tables.append((1.0 - mix) / size + mix * draw)
        return cls(partition, tables)

    def copy(self) -> "GmfState":
        return GmfState(self.partition, [t.copy() for t in self.tables])

    def validate(self, tol: float = NORMALIZATION_TOL) -> None:
        for c, table in enumerate(self.tables):
            if np.any(table < 0) or abs(float(table.sum()) - 1.0) > tol:
                raise NormalizationError(
                    "Cluster table is not a normalized distribution", {"cluster": c, "sum": float(table.sum())}
                )

    def node_means(self) -> np.ndarray:
        """<x_i> under the table of the cluster containing i."""
        means = np.zeros(self.partition.n)
        for nodes, table in zip(self.partition.clusters, self.tables, strict=True):
            means[nodes] = table @ local_spins(len(nodes))
        return means


def singleton_marginals(state: GmfState) -> np.ndarray:
    """P(X_i = +1) for every node."""
    return 0.5 * (1.0 + state.node_means())


# =============================================================================
# Neighborhoods
# =============================================================================


@dataclass(frozen=True, eq=False)
class ClusterNeighborhood:
    """Clique classification of one cluster.

    internal_edges / border_edges index into mrf.edges. For border edges,
    border_inside holds the local position of the endpoint inside the cluster
    and border_outside the node id of the endpoint outside it.
    """

    cluster: int
    nodes: np.ndarray
    internal_edges: np.ndarray
    border_edges: np.ndarray
    border_inside: np.ndarray
    border_outside: np.ndarray
    markov_blanket: np.ndarray
    local_coupling: np.ndarray

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def internal_cliques(self, mrf: MarkovRandomField) -> list[tuple[int, ...]]:
        """Singleton cliques of the cluster's nodes followed by its internal edges."""
        return [(int(i),) for i in self.nodes] + [tuple(int(v) for v in mrf.edges[e]) for e in self.internal_edges]

    def border_cliques(self, mrf: MarkovRandomField) -> list[tuple[int, int]]:
        return [tuple(int(v) for v in mrf.edges[e]) for e in self.border_edges]


def build_neighborhoods(mrf: MarkovRandomField, partition: Partition) -> list[ClusterNeighborhood]:
    """Classify every clique as internal to one cluster or border to each cluster it touches."""
    if partition.n != mrf.n:
        raise ValidationError("Partition does not match model size", {"model_n": mrf.n, "partition_n": partition.n})

    assign = partition.assignment
    left, right = (mrf.edges[:, 0], mrf.edges[:, 1]) if mrf.num_edges else (np.zeros(0, int), np.zeros(0, int))
    cl, cr = assign[left], assign[right]
    position = np.empty(mrf.n, dtype=np.int64)
    for nodes in partition.clusters:
        position[nodes] = np.arange(nodes.size)

    neighborhoods = []
    for c, nodes in enumerate(partition.clusters):
        internal = np.flatnonzero((cl == c) & (cr == c))
        out_left = np.flatnonzero((cl == c) & (cr != c))  # inside endpoint is left
        out_right = np.flatnonzero((cr == c) & (cl != c))  # inside endpoint is right
        border = np.concatenate((out_left, out_right))
        inside = np.concatenate((left[out_left], right[out_right]))
        outside = np.concatenate((right[out_left], left[out_right]))

        J = np.zeros((nodes.size, nodes.size))
        if internal.size:
            a, b = position[left[internal]], position[right[internal]]
            J[a, b] = mrf.theta_edge[internal]
            J[b, a] = mrf.theta_edge[internal]

        neighborhoods.append(
            ClusterNeighborhood(
                cluster=c,
                nodes=nodes,
                internal_edges=internal,
                border_edges=border,
                border_inside=position[inside],
                border_outside=outside,
                markov_blanket=np.unique(outside),
                local_coupling=J,
            )
        )
    return neighborhoods


# =============================================================================
# Updates
# =============================================================================


@dataclass(frozen=True)
class PeripheralPotential:
    """phi'(x_i) = x_i * <x_j> for a cut edge (i, j) seen from the cluster of i."""

    node: int
    neighbor: int
    neighbor_mean: float

    def __call__(self, x_i: float) -> float:
        return x_i * self.neighbor_mean


def peripheral_potential(
    mrf: MarkovRandomField, edge: tuple[int, int], state: GmfState
) -> PeripheralPotential:
    """Expectation of x_i x_j over the neighbor j's cluster table, as a function of x_i."""
    i, j = edge
    assign = state.partition.assignment
    if assign[i] == assign[j]:
        raise ValidationError("Edge is internal to a cluster", {"edge": (i, j)})
    c = assign[j]
    nodes = state.partition.clusters[c]
    local = int(np.searchsorted(nodes, j))
    mean = float(state.tables[c] @ local_spins(nodes.size)[:, local])
    return PeripheralPotential(node=i, neighbor=j, neighbor_mean=mean)


def cluster_log_potential(
    mrf: MarkovRandomField, neighborhood: ClusterNeighborhood, means: np.ndarray
) -> np.ndarray:
    """Unnormalized log q_c over the 2^m configurations, given current node means."""
    nodes = neighborhood.nodes
    spins = local_spins(nodes.size)
    fields = mrf.theta_node[nodes].copy()
    if neighborhood.border_edges.size:
        np.add.at(
            fields,
            neighborhood.border_inside,
            mrf.theta_edge[neighborhood.border_edges] * means[neighborhood.border_outside],
        )
    log_w = spins @ fields
    if neighborhood.internal_edges.size:
        log_w += 0.5 * np.einsum("si,ij,sj->s", spins, neighborhood.local_coupling, spins)
    return log_w


def update_cluster(
    mrf: MarkovRandomField,
    neighborhood: ClusterNeighborhood,
    state: GmfState,
    cluster: int,
    *,
    means: np.ndarray | None = None,
    cap: int = CLUSTER_SIZE_CAP,
) -> np.ndarray:
    """New normalized table for `cluster`; the state itself is not modified."""
    if neighborhood.cluster != cluster:
        raise ValidationError("Neighborhood belongs to another cluster", {"expected": cluster, "got": neighborhood.cluster})
    if neighborhood.size > cap:
        raise CapacityError("Cluster exceeds table size cap", {"limit": cap, "requested": neighborhood.size})
    if means is None:
        means = state.node_means()
    log_w = cluster_log_potential(mrf, neighborhood, means)
    return np.exp(log_w - logsumexp(log_w))


def _damped(new: np.ndarray, old: np.ndarray, damping: float) -> np.ndarray:
    log_mix = (1.0 - damping) * np.log(np.maximum(new, LOG_ZERO_FLOOR)) + damping * np.log(
        np.maximum(old, LOG_ZERO_FLOOR)
    )
    return np.exp(log_mix - logsumexp(log_mix))


@dataclass
class ConvergenceReport:
    sweeps: int
    residual: float
    converged: bool
    bound_history: list[float] = field(default_factory=list)


def run_gmf(
    mrf: MarkovRandomField,
    partition: Partition,
    config: GmfConfig | None = None,
    *,
    track_bound: bool = False,
) -> tuple[GmfState, ConvergenceReport]:
    """
    Asynchronous GMF sweeps to a fixed point.

    Returns the final state and a report with sweeps used, final residual
    (max change of P(X_i=+1) in the last sweep) and the converged flag.
    Non-convergence is reported, not raised.
    """
    config = config or GmfConfig()
    neighborhoods = build_neighborhoods(mrf, partition)
    too_big = max(nb.size for nb in neighborhoods)
    if too_big > config.cluster_cap:
        raise CapacityError("Cluster exceeds table size cap", {"limit": config.cluster_cap, "requested": too_big})

    if config.init == "random":
        state = GmfState.random(partition, config.seed)
    else:
        state = GmfState.uniform(partition)
    has_messages = any(nb.border_edges.size for nb in neighborhoods)

    means = state.node_means()
    report = ConvergenceReport(sweeps=0, residual=float("inf"), converged=False)
    if track_bound:
        report.bound_history.append(gmf_lower_bound(mrf, state))

    for sweep in range(1, config.max_sweeps + 1):
        previous = means.copy()
        for nb in neighborhoods:
            table = update_cluster(mrf, nb, state, nb.cluster, means=means, cap=config.cluster_cap)
            if config.damping > 0:
                table = _damped(table, state.tables[nb.cluster], config.damping)
            state.tables[nb.cluster] = table
            means[nb.nodes] = table @ local_spins(nb.size)

        report.sweeps = sweep
        report.residual = 0.5 * float(np.max(np.abs(means - previous)))
        if track_bound:
            report.bound_history.append(gmf_lower_bound(mrf, state))

        if not has_messages and config.damping == 0:
            # Without messages the first sweep already yields the fixed point
            report.residual = 0.0
        if report.residual < config.tol:
            report.converged = True
            break

    if report.converged:
        logger.debug("gmf.converged", k=partition.k, sweeps=report.sweeps, residual=report.residual)
    else:
        logger.warning("gmf.not_converged", k=partition.k, sweeps=report.sweeps, residual=report.residual)
    return state, report


# =============================================================================
# Variational objective
# =============================================================================


def state_entropy(state: GmfState) -> float:
    """H(q) = sum of cluster table entropies."""
    return float(sum(entr(t).sum() for t in state.tables))


def expected_log_weight(mrf: MarkovRandomField, state: GmfState) -> float:
    """
    E_q[log p~(X)] by clique decomposition.

    Singleton cliques and internal edges use their cluster table; cut edges
    use the product of the two endpoint means.
    """
    means = state.node_means()
    total = float(mrf.theta_node @ means)
    if not mrf.num_edges:
        return total

    assign = state.partition.assignment
    left, right = mrf.edges[:, 0], mrf.edges[:, 1]
    cut = assign[left] != assign[right]
    total += float(mrf.theta_edge[cut] @ (means[left[cut]] * means[right[cut]]))

    position = np.empty(mrf.n, dtype=np.int64)
    for nodes in state.partition.clusters:
        position[nodes] = np.arange(nodes.size)
    for c, (nodes, table) in enumerate(zip(state.partition.clusters, state.tables, strict=True)):
        inside = np.flatnonzero((assign[left] == c) & (assign[right] == c))
        if inside.size:
            spins = local_spins(nodes.size)
            pair = spins[:, position[left[inside]]] * spins[:, position[right[inside]]]
            total += float(table @ pair @ mrf.theta_edge[inside])
    return total


def gmf_lower_bound(mrf: MarkovRandomField, state: GmfState) -> float:
    """E_q[log p~] + H(q), a lower bound on log Z for every normalized q."""
    return expected_log_weight(mrf, state) + state_entropy(state)


def log_partition_of_state(mrf: MarkovRandomField, state: GmfState) -> float:
    """log Z_q = sum of cluster log-normalizers under the current peripheral potentials."""
    means = state.node_means()
    return float(
        sum(logsumexp(cluster_log_potential(mrf, nb, means)) for nb in build_neighborhoods(mrf, state.partition))
    )


# =============================================================================
# Serialization
# =============================================================================


def format_state(state: GmfState) -> str:
    """`k`, then per cluster a line of node ids and a line of 2^m table entries."""
    lines = [str(state.partition.k)]
    for nodes, table in zip(state.partition.clusters, state.tables, strict=True):
        lines.append(" ".join(str(int(v)) for v in nodes))
        lines.append(" ".join(MODEL_FLOAT_FORMAT % p for p in table))
    return "\n".join(lines) + "\n"


def parse_state(text: str) -> GmfState:
    lines = [line.split() for line in text.splitlines() if line.strip()]
    try:
        k = int(lines[0][0])
        if len(lines) != 1 + 2 * k:
            raise SerializationError("State file line count does not match cluster count", {"k": k})
        clusters = [[int(v) for v in lines[1 + 2 * c]] for c in range(k)]
        tables = [np.array([float(v) for v in lines[2 + 2 * c]]) for c in range(k)]
    except SerializationError:
        raise
    except (ValueError, IndexError) as e:
        raise SerializationError("Malformed state file", original_error=e) from e

    if any(c != sorted(c) for c in clusters):
        raise SerializationError("Cluster node ids must be listed in ascending order")
    try:
        return GmfState(Partition.from_clusters(clusters), tables)
    except ValidationError as e:
        raise SerializationError("State file describes an invalid state", original_error=e) from e


def save_state(state: GmfState, path: str | Path) -> Path:
    p = Path(path)
    p.write_text(format_state(state))
    logger.info("gmf.state_saved", path=str(p), k=state.partition.k)
    return p


def load_state(path: str | Path) -> GmfState:
    p = Path(path)
    if not p.exists():
        raise SerializationError(f"State file not found: {path}")
    return parse_state(p.read_text())
