"""Pairwise binary Markov random fields.

A model stores signed singleton parameters theta_i and pairwise parameters
theta_ij over spins x in {-1, +1}^n, with potentials phi_i(x) = x_i and
phi_ij(x) = x_i x_j:

    log p~(x) = sum_i theta_i x_i + sum_(i,j) theta_ij x_i x_j

Random models follow the usual Erdos-Renyi construction with uniform
parameter draws; every random stream in the toolkit is a numpy PCG64
generator seeded through SeedSequence.
"""

from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np
from networkx.algorithms.approximation import treewidth_min_fill_in

from .constants import DEFAULT_SEED, MODEL_FLOAT_FORMAT
from .exceptions import SerializationError, ValidationError
from .logger import logger


class Coupling(StrEnum):
    ATTRACTIVE = "attractive"
    REPULSIVE = "repulsive"
    MIXED = "mixed"

    def edge_range(self, w_coup: float) -> tuple[float, float]:
        """Uniform sampling range of theta_ij for this coupling type."""
        if self is Coupling.ATTRACTIVE:
            return 0.0, w_coup
        if self is Coupling.REPULSIVE:
            return -w_coup, 0.0
        return -w_coup, w_coup


# =============================================================================
# Random streams
# =============================================================================


def derive_seed(seed: int, *path: int) -> int:
    """Derive an independent 64-bit seed from a master seed and an index path."""
    state = np.random.SeedSequence([seed, *path]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def trial_rng(seed: int, trial: int, *path: int) -> np.random.Generator:
    """Random generator for one trial (and optional sub-stream)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial, *path])))


# =============================================================================
# Model
# =============================================================================


@dataclass(frozen=True)
class RandomModelSpec:
    """Sampling recipe for a random pairwise model."""

    n: int
    edge_prob: float
    w_obs: float = 0.1
    w_coup: float = 1.0
    coupling: Coupling = Coupling.MIXED
    seed: int = DEFAULT_SEED

    def validate(self) -> None:
        context = {"n": self.n, "edge_prob": self.edge_prob, "w_obs": self.w_obs, "w_coup": self.w_coup}
        if self.n < 1:
            raise ValidationError("Model needs at least one node", context)
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValidationError("Edge probability must lie in [0, 1]", context)
        if self.w_obs < 0 or self.w_coup < 0:
            raise ValidationError("Weight ranges must be non-negative", context)
        if self.seed < 0:
            raise ValidationError("Seed must be non-negative", {"seed": self.seed})


@dataclass(frozen=True, eq=False)
class MarkovRandomField:
    """Pairwise binary MRF with signed parameters.

    Edges are stored canonically as (i, j) with i < j, sorted
    lexicographically; theta_edge[e] belongs to edges[e]. Arrays are
    read-only after construction.
    """

    n: int
    edges: np.ndarray
    theta_node: np.ndarray
    theta_edge: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("Model needs at least one node", {"n": self.n})

        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        theta_node = np.asarray(self.theta_node, dtype=np.float64).reshape(-1)
        theta_edge = np.asarray(self.theta_edge, dtype=np.float64).reshape(-1)

        if theta_node.shape != (self.n,):
            raise ValidationError("theta_node must have one entry per node", {"n": self.n, "got": theta_node.size})
        if theta_edge.shape[0] != edges.shape[0]:
            raise ValidationError(
                "theta_edge must have one entry per edge", {"edges": edges.shape[0], "got": theta_edge.size}
            )
        if edges.size and (edges.min() < 0 or edges.max() >= self.n):
            raise ValidationError("Edge references a node outside the model", {"n": self.n})
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValidationError("Self-loops are not allowed", {"n": self.n})

        edges = np.sort(edges, axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges = edges[order]
        theta_edge = theta_edge[order]
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise ValidationError("Duplicate edges are not allowed", {"n": self.n})
        if not (np.all(np.isfinite(theta_node)) and np.all(np.isfinite(theta_edge))):
            raise ValidationError("Parameters must be finite", {"n": self.n})

        for arr in (edges, theta_node, theta_edge):
            arr.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "theta_node", theta_node)
        object.__setattr__(self, "theta_edge", theta_edge)

    @classmethod
    def from_edge_list(
        cls, n: int, theta_node, edge_list: list[tuple[int, int, float]] | None = None
    ) -> "MarkovRandomField":
        """Build a model from (i, j, theta_ij) triples."""
        edge_list = edge_list or []
        edges = np.array([(i, j) for i, j, _ in edge_list], dtype=np.int64).reshape(-1, 2)
        theta_edge = np.array([t for _, _, t in edge_list], dtype=np.float64)
        return cls(n=n, edges=edges, theta_node=theta_node, theta_edge=theta_edge)

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric matrix J with J[i, j] = theta_ij and zero diagonal."""
        J = np.zeros((self.n, self.n))
        if self.num_edges:
            J[self.edges[:, 0], self.edges[:, 1]] = self.theta_edge
            J[self.edges[:, 1], self.edges[:, 0]] = self.theta_edge
        J.setflags(write=False)
        return J

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        adjacency = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adjacency[i].append(j)
            adjacency[j].append(i)
        return tuple(np.array(sorted(a), dtype=np.int64) for a in adjacency)

    def to_networkx(self) -> nx.Graph:
        """Undirected graph with the signed coupling stored as edge attribute 'theta'."""
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_weighted_edges_from(
            ((int(i), int(j), float(t)) for (i, j), t in zip(self.edges, self.theta_edge, strict=True)),
            weight="theta",
        )
        return graph

    def with_theta(self, theta_node=None, theta_edge=None) -> "MarkovRandomField":
        """Copy of the model with replaced parameters on the same graph."""
        return MarkovRandomField(
            n=self.n,
            edges=self.edges,
            theta_node=self.theta_node if theta_node is None else theta_node,
            theta_edge=self.theta_edge if theta_edge is None else theta_edge,
        )


# =============================================================================
# Operations
# =============================================================================


def generate_random_mrf(spec: RandomModelSpec) -> MarkovRandomField:
    """
    Sample a random pairwise model.

    Each of the n(n-1)/2 node pairs is an edge independently with probability
    spec.edge_prob; theta_i ~ U(-w_obs, w_obs) and theta_ij is drawn from the
    coupling-dependent range. Draw order (edges, nodes, couplings) is fixed so
    identical specs produce identical models.
    """
    spec.validate()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))

    rows, cols = np.triu_indices(spec.n, k=1)
    mask = rng.random(rows.size) < spec.edge_prob
    edges = np.column_stack((rows[mask], cols[mask]))

    theta_node = rng.uniform(-spec.w_obs, spec.w_obs, size=spec.n)
    low, high = spec.coupling.edge_range(spec.w_coup)
    theta_edge = rng.uniform(low, high, size=edges.shape[0])

    mrf = MarkovRandomField(n=spec.n, edges=edges, theta_node=theta_node, theta_edge=theta_edge)
    logger.debug("mrf.generated", n=spec.n, edges=mrf.num_edges, coupling=spec.coupling.value, seed=spec.seed)
    return mrf


def validate_assignment(mrf: MarkovRandomField, x) -> np.ndarray:
    """Return x as a float spin vector or raise ValidationError."""
    arr = np.asarray(x)
    if arr.shape != (mrf.n,):
        raise ValidationError("Assignment has wrong length", {"expected": mrf.n, "got": arr.size})
    if not np.all((arr == 1) | (arr == -1)):
        raise ValidationError("Assignment values must be -1 or +1", {"n": mrf.n})
    return arr.astype(np.float64)


def log_unnormalized_prob(mrf: MarkovRandomField, x) -> float:
    """sum_i theta_i x_i + sum_(i,j) theta_ij x_i x_j for a full spin assignment."""
    spins = validate_assignment(mrf, x)
    pair = spins[mrf.edges[:, 0]] * spins[mrf.edges[:, 1]] if mrf.num_edges else np.zeros(0)
    return float(mrf.theta_node @ spins + mrf.theta_edge @ pair)


def treewidth_estimate(mrf: MarkovRandomField) -> int:
    """Upper bound on the treewidth from the min-fill-in elimination heuristic."""
    if mrf.num_edges == 0:
        return 0
    width, _ = treewidth_min_fill_in(mrf.to_networkx())
    return int(width)


# =============================================================================
# Serialization
# =============================================================================


def format_mrf(mrf: MarkovRandomField) -> str:
    """Plain-text model: `n m`, then `i theta_i` lines, then `i j theta_ij` lines."""
    lines = [f"{mrf.n} {mrf.num_edges}"]
    lines += [f"{i} {MODEL_FLOAT_FORMAT % t}" for i, t in enumerate(mrf.theta_node)]
    lines += [
        f"{i} {j} {MODEL_FLOAT_FORMAT % t}" for (i, j), t in zip(mrf.edges, mrf.theta_edge, strict=True)
    ]
    return "\n".join(lines) + "\n"


def parse_mrf(text: str) -> MarkovRandomField:
    lines = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    try:
        n, m = (int(v) for v in lines[0])
        node_lines = lines[1 : 1 + n]
        edge_lines = lines[1 + n : 1 + n + m]
        if len(node_lines) != n or len(edge_lines) != m or len(lines) != 1 + n + m:
            raise SerializationError("Model file line count does not match header", {"n": n, "m": m})

        theta_node = np.zeros(n)
        seen = set()
        for parts in node_lines:
            i = int(parts[0])
            if not 0 <= i < n or i in seen:
                raise SerializationError("Invalid or repeated node index", {"node": i})
            seen.add(i)
            theta_node[i] = float(parts[1])
        edge_list = [(int(p[0]), int(p[1]), float(p[2])) for p in edge_lines]
    except SerializationError:
        raise
    except (ValueError, IndexError) as e:
        raise SerializationError("Malformed model file", original_error=e) from e

    try:
        return MarkovRandomField.from_edge_list(n, theta_node, edge_list)
    except ValidationError as e:
        raise SerializationError("Model file describes an invalid model", original_error=e) from e


def save_mrf(mrf: MarkovRandomField, path: str | Path) -> Path:
    p = Path(path)
    p.write_text(format_mrf(mrf))
    logger.info("mrf.saved", path=str(p), n=mrf.n, edges=mrf.num_edges)
    return p


def load_mrf(path: str | Path) -> MarkovRandomField:
    p = Path(path)
    if not p.exists():
        raise SerializationError(f"Model file not found: {path}")
    return parse_mrf(p.read_text())
