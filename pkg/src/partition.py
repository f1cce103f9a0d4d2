"""Graph partitions, affinity matrices and cut weights.

A Partition assigns every node a cluster id in 0..k-1 (ids are zero-based in
code and in partition files). The partition engine produces equipartitions
(every cluster has m = n/k nodes); inference also accepts unequal clusters,
e.g. one cluster per connected component.
"""

import itertools
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from .constants import BRUTE_FORCE_CAP, INVERSE_COUPLING_EPS, ZERO_CUT_TOL
from .exceptions import CapacityError, SerializationError, ValidationError
from .logger import logger
from .mrf import MarkovRandomField


class AffinityScheme(StrEnum):
    UNIT = "unit"
    COUPLING = "coupling"
    INVERSE_COUPLING = "inverse_coupling"


class Direction(StrEnum):
    MIN = "min"
    MAX = "max"

    def better(self, candidate: float, incumbent: float) -> bool:
        """Strict improvement in this direction."""
        return candidate < incumbent if self is Direction.MIN else candidate > incumbent


# =============================================================================
# Partition
# =============================================================================


@dataclass(frozen=True, eq=False)
class Partition:
    """Disjoint assignment of n nodes to k non-empty clusters."""

    assignment: np.ndarray
    k: int

    def __post_init__(self):
        assignment = np.array(self.assignment, dtype=np.int64).reshape(-1)
        if assignment.size == 0:
            raise ValidationError("Partition must cover at least one node")
        if self.k < 1:
            raise ValidationError("Partition needs at least one cluster", {"k": self.k})
        if assignment.min() < 0 or assignment.max() >= self.k:
            raise ValidationError("Cluster id out of range", {"k": self.k})
        sizes = np.bincount(assignment, minlength=self.k)
        if np.any(sizes == 0):
            raise ValidationError("Every cluster must be non-empty", {"k": self.k, "sizes": sizes.tolist()})
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)

    @classmethod
    def from_clusters(cls, clusters: Sequence[Sequence[int]], n: int | None = None) -> "Partition":
        nodes = [int(v) for c in clusters for v in c]
        n = len(nodes) if n is None else n
        if sorted(nodes) != list(range(n)):
            raise ValidationError("Clusters must cover nodes 0..n-1 exactly once", {"n": n})
        assignment = np.empty(n, dtype=np.int64)
        for cid, cluster in enumerate(clusters):
            assignment[list(cluster)] = cid
        return cls(assignment=assignment, k=len(clusters))

    @classmethod
    def single(cls, n: int) -> "Partition":
        return cls(assignment=np.zeros(n, dtype=np.int64), k=1)

    @property
    def n(self) -> int:
        return int(self.assignment.size)

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    @cached_property
    def clusters(self) -> tuple[np.ndarray, ...]:
        """Node ids of each cluster in ascending order."""
        return tuple(np.flatnonzero(self.assignment == c) for c in range(self.k))

    @property
    def is_equipartition(self) -> bool:
        return bool(np.all(self.sizes == self.sizes[0]))

    @property
    def cluster_size(self) -> int:
        if not self.is_equipartition:
            raise ValidationError("Partition is not an equipartition", {"sizes": self.sizes.tolist()})
        return int(self.sizes[0])

    def indicator(self) -> np.ndarray:
        """Indicator matrix X (n x k) with X[i, c] = 1 iff node i is in cluster c."""
        X = np.zeros((self.n, self.k))
        X[np.arange(self.n), self.assignment] = 1.0
        return X

    def canonical(self) -> np.ndarray:
        """Labels renumbered by first appearance, for label-free comparisons."""
        _, first, inverse = np.unique(self.assignment, return_index=True, return_inverse=True)
        rank = np.argsort(np.argsort(first))
        return rank[inverse]

    def same_as(self, other: "Partition") -> bool:
        return self.n == other.n and np.array_equal(self.canonical(), other.canonical())


def singleton_partition(n: int) -> Partition:
    """One cluster per node (naive mean field)."""
    return Partition(assignment=np.arange(n), k=n)


def component_partition(mrf: MarkovRandomField) -> Partition:
    """One cluster per connected component of the model graph."""
    components = sorted((sorted(c) for c in nx.connected_components(mrf.to_networkx())), key=lambda c: c[0])
    return Partition.from_clusters(components, n=mrf.n)


def require_divisible(n: int, k: int) -> int:
    """Cluster size m = n / k, or ValidationError when k does not divide n."""
    if k < 1 or n < k or n % k:
        raise ValidationError("Cluster count must divide the node count", {"n": n, "k": k})
    return n // k


# =============================================================================
# Affinity and Laplacian
# =============================================================================


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Symmetric non-negative edge weights with zero diagonal."""

    weights: np.ndarray

    def __post_init__(self):
        W = np.array(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError("Affinity matrix must be square", {"shape": W.shape})
        if not np.array_equal(W, W.T):
            raise ValidationError("Affinity matrix must be symmetric")
        if np.any(np.diag(W) != 0):
            raise ValidationError("Affinity matrix must have zero diagonal")
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValidationError("Affinity weights must be finite and non-negative")
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @classmethod
    def from_edges(cls, n: int, edges: np.ndarray, values: np.ndarray) -> "AffinityMatrix":
        W = np.zeros((n, n))
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            W[edges[:, 0], edges[:, 1]] = values
            W[edges[:, 1], edges[:, 0]] = values
        return cls(W)

    @property
    def n(self) -> int:
        return int(self.weights.shape[0])

    @property
    def total_weight(self) -> float:
        return float(np.triu(self.weights, 1).sum())


def build_affinity(
    mrf: MarkovRandomField, scheme: AffinityScheme | str, eps: float = INVERSE_COUPLING_EPS
) -> AffinityMatrix:
    """
    Affinity matrix of a model under one of the partition weighting schemes.

    unit: a_ij = 1 on edges; coupling: a_ij = |theta_ij|;
    inverse_coupling: a_ij = 1 / max(|theta_ij|, eps).
    """
    scheme = AffinityScheme(scheme)
    magnitude = np.abs(mrf.theta_edge)
    if scheme is AffinityScheme.UNIT:
        values = np.ones(mrf.num_edges)
    elif scheme is AffinityScheme.COUPLING:
        values = magnitude
    else:
        values = 1.0 / np.maximum(magnitude, eps)
    return AffinityMatrix.from_edges(mrf.n, mrf.edges, values)


def laplacian(A: AffinityMatrix) -> np.ndarray:
    """L = Diag(A e) - A."""
    return np.diag(A.weights.sum(axis=1)) - A.weights


# =============================================================================
# Cuts
# =============================================================================


def _check_sizes(A: AffinityMatrix, part: Partition) -> None:
    if A.n != part.n:
        raise ValidationError("Partition and affinity sizes differ", {"affinity_n": A.n, "partition_n": part.n})


def cut_weight(A: AffinityMatrix, part: Partition) -> float:
    """Total weight of edges whose endpoints lie in different clusters."""
    _check_sizes(A, part)
    crossing = part.assignment[:, None] != part.assignment[None, :]
    return float(np.triu(A.weights * crossing, 1).sum())


def cut_weight_trace(A: AffinityMatrix, part: Partition) -> float:
    """The same cut as 1/2 tr(X^t L X)."""
    _check_sizes(A, part)
    X = part.indicator()
    return 0.5 * float(np.trace(X.T @ laplacian(A) @ X))


def maxcut_via_affinity_identity(A: AffinityMatrix, part: Partition) -> float:
    """Cut from sum_i d_ii - tr(X^t A X), halved to count each edge once."""
    _check_sizes(A, part)
    X = part.indicator()
    return 0.5 * float(A.weights.sum() - np.trace(X.T @ A.weights @ X))


def fb_ratio(feasible: float, bound: float) -> float:
    """Feasible cut over relaxation bound; zero-weight cuts count as 1."""
    if abs(bound) < ZERO_CUT_TOL:
        return 1.0 if abs(feasible) < ZERO_CUT_TOL else math.inf
    return feasible / bound


# =============================================================================
# Equipartitions
# =============================================================================


def random_equipartition(n: int, k: int, seed: int) -> Partition:
    """Uniformly random permutation chopped into k blocks of size n/k."""
    m = require_divisible(n, k)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.repeat(np.arange(k), m)
    return Partition(assignment=assignment, k=k)


def count_equipartitions(n: int, k: int) -> int:
    """Number of unordered partitions of n nodes into k blocks of n/k."""
    m = require_divisible(n, k)
    return math.factorial(n) // (math.factorial(m) ** k * math.factorial(k))


def iter_equipartitions(n: int, k: int) -> Iterator[np.ndarray]:
    """Yield each unordered equipartition once, as an assignment vector.

    Each block is opened by the smallest unassigned node, so block labels
    are canonical.
    """
    m = require_divisible(n, k)
    assignment = np.full(n, -1, dtype=np.int64)

    def extend(block: int) -> Iterator[np.ndarray]:
        if block == k:
            yield assignment.copy()
            return
        free = np.flatnonzero(assignment < 0)
        head, rest = free[0], free[1:]
        for others in itertools.combinations(rest, m - 1):
            members = [head, *others]
            assignment[members] = block
            yield from extend(block + 1)
            assignment[members] = -1

    yield from extend(0)


def brute_force_equipartition(
    A: AffinityMatrix, k: int, direction: Direction | str, cap: int = BRUTE_FORCE_CAP
) -> tuple[Partition, float]:
    """Exact optimum of k-equi-MinCut / k-equi-MaxCut by exhaustive enumeration."""
    direction = Direction(direction)
    count = count_equipartitions(A.n, k)
    if count > cap:
        raise CapacityError("Too many equipartitions to enumerate", {"limit": cap, "requested": count})

    W = A.weights
    total = A.total_weight
    best_assignment, best_cut = None, None
    for assignment in iter_equipartitions(A.n, k):
        same = assignment[:, None] == assignment[None, :]
        cut = total - 0.5 * float((W * same).sum())
        if best_cut is None or direction.better(cut, best_cut):
            best_assignment, best_cut = assignment, cut

    logger.debug("partition.brute_force", n=A.n, k=k, direction=direction.value, candidates=count, cut=best_cut)
    return Partition(assignment=best_assignment, k=k), float(best_cut)


# =============================================================================
# Serialization
# =============================================================================


def format_partition(part: Partition) -> str:
    """`k` on the first line, then one `node cluster` line per node."""
    lines = [str(part.k)] + [f"{i} {c}" for i, c in enumerate(part.assignment)]
    return "\n".join(lines) + "\n"


def parse_partition(text: str) -> Partition:
    lines = [line.split() for line in text.splitlines() if line.strip()]
    try:
        k = int(lines[0][0])
        pairs = sorted((int(p[0]), int(p[1])) for p in lines[1:])
    except (ValueError, IndexError) as e:
        raise SerializationError("Malformed partition file", original_error=e) from e
    if [i for i, _ in pairs] != list(range(len(pairs))):
        raise SerializationError("Partition file must list nodes 0..n-1 exactly once")
    try:
        return Partition(assignment=np.array([c for _, c in pairs]), k=k)
    except ValidationError as e:
        raise SerializationError("Partition file describes an invalid partition", original_error=e) from e


def save_partition(part: Partition, path: str | Path) -> Path:
    p = Path(path)
    p.write_text(format_partition(part))
    logger.info("partition.saved", path=str(p), n=part.n, k=part.k)
    return p


def load_partition(path: str | Path) -> Partition:
    p = Path(path)
    if not p.exists():
        raise SerializationError(f"Partition file not found: {path}")
    return parse_partition(p.read_text())
