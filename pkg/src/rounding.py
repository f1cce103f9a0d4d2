"""Rounding relaxed solutions to feasible equipartitions, and the partition schemes.

Both rounding strategies embed node i as row i of X' = U Lambda^(1/2), where
Y = U Lambda U^t with negative eigenvalues clamped to zero:

- K-means rounding: Lloyd iterations whose assignment step is a greedy
  capacity-constrained assignment (ascending distance, ties by node index).
- Random projection: each node goes to the random direction with the
  largest projection, then surplus nodes with the least margin are moved to
  clusters with free capacity.

Each restart / projection sample uses its own stream derived from
(seed, index); the best cut wins and ties keep the lowest index.
"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from .constants import (
    INVERSE_COUPLING_EPS,
    KMEANS_MAX_ITERS,
    KMEANS_RESTARTS,
    PROJECTION_TRIALS,
    RELAXATION_MAX_ITERS,
    RELAXATION_TOL,
)
from .exceptions import ValidationError
from .logger import logger
from .mrf import MarkovRandomField
from .partition import (
    AffinityMatrix,
    AffinityScheme,
    Direction,
    Partition,
    build_affinity,
    cut_weight,
    fb_ratio,
    random_equipartition,
    require_divisible,
)
from .relaxation import RelaxationResult, SolverReport, solve_relaxation


class Rounding(StrEnum):
    KMEANS = "kmeans"
    RANDOM_PROJECTION = "rp"


def _stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


# =============================================================================
# Embedding
# =============================================================================


def embed_relaxation(Y: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Rows of U Lambda^(1/2) for Y = U Lambda U^t, negative eigenvalues clamped to 0."""
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (Y + Y.T))
    if eigenvalues[0] < -tol:
        logger.warning("rounding.negative_eigenvalue_clamped", value=float(eigenvalues[0]))
    return eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))


# =============================================================================
# Equal-size K-means
# =============================================================================


def balanced_assign(distances: np.ndarray, capacity: int) -> np.ndarray:
    """
    Greedy capacity-constrained assignment.

    Visits all (node, cluster) pairs by ascending distance, ties broken by
    lower node index then lower cluster index, and assigns a node to the
    first cluster it meets that still has room.
    """
    n, k = distances.shape
    node_idx, cluster_idx = np.divmod(np.arange(n * k), k)
    order = np.lexsort((cluster_idx, node_idx, distances.reshape(-1)))

    assignment = np.full(n, -1, dtype=np.int64)
    load = np.zeros(k, dtype=np.int64)
    remaining = n
    for flat in order:
        i, c = node_idx[flat], cluster_idx[flat]
        if assignment[i] >= 0 or load[c] >= capacity:
            continue
        assignment[i] = c
        load[c] += 1
        remaining -= 1
        if remaining == 0:
            break
    return assignment


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _init_centroids(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding; falls back to uniform picks when all remaining points coincide."""
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    for _ in range(1, k):
        d2 = _squared_distances(points, points[chosen]).min(axis=1)
        d2[chosen] = 0.0
        total = d2.sum()
        if total > 0:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            chosen.append(int(rng.choice(free)))
    return points[chosen].copy()


def equal_size_kmeans(
    points: np.ndarray, k: int, rng: np.random.Generator, max_iters: int = KMEANS_MAX_ITERS
) -> np.ndarray:
    """Lloyd iterations with balanced assignment; returns a node -> cluster vector."""
    n = points.shape[0]
    capacity = require_divisible(n, k)
    centroids = _init_centroids(points, k, rng)
    assignment = balanced_assign(_squared_distances(points, centroids), capacity)
    for _ in range(max_iters):
        centroids = np.stack([points[assignment == c].mean(axis=0) for c in range(k)])
        updated = balanced_assign(_squared_distances(points, centroids), capacity)
        if np.array_equal(updated, assignment):
            break
        assignment = updated
    return assignment


def _select_best(
    candidates, A: AffinityMatrix, k: int, direction: Direction
) -> tuple[Partition, float]:
    best_part, best_cut = None, None
    for assignment in candidates:
        part = Partition(assignment=assignment, k=k)
        cut = cut_weight(A, part)
        if best_cut is None or direction.better(cut, best_cut):
            best_part, best_cut = part, cut
    return best_part, best_cut


def round_kmeans(
    res: RelaxationResult,
    A: AffinityMatrix,
    k: int,
    direction: Direction | str,
    restarts: int = KMEANS_RESTARTS,
    seed: int = 0,
) -> Partition:
    """Best equal-size K-means clustering of the relaxation embedding over `restarts` restarts."""
    if restarts < 1:
        raise ValidationError("K-means rounding needs at least one restart", {"restarts": restarts})
    direction = Direction(direction)
    points = embed_relaxation(res.Y)
    candidates = (equal_size_kmeans(points, k, _stream(seed, r)) for r in range(restarts))
    part, cut = _select_best(candidates, A, k, direction)
    logger.debug("rounding.kmeans", k=k, direction=direction.value, restarts=restarts, cut=round(cut, 6))
    return part


# =============================================================================
# Random projection
# =============================================================================


def repair_to_capacity(scores: np.ndarray, assignment: np.ndarray, capacity: int) -> np.ndarray:
    """Move surplus nodes out of over-full clusters, least assignment margin first."""
    n, k = scores.shape
    assignment = assignment.copy()
    load = np.bincount(assignment, minlength=k)
    while np.any(load > capacity):
        open_clusters = np.flatnonzero(load < capacity)
        movable = np.flatnonzero(load[assignment] > capacity)
        targets = open_clusters[np.argmax(scores[np.ix_(movable, open_clusters)], axis=1)]
        margins = scores[movable, assignment[movable]] - scores[movable, targets]
        pick = int(np.argmin(margins))  # first minimum = lowest node index
        node, target = movable[pick], targets[pick]
        load[assignment[node]] -= 1
        load[target] += 1
        assignment[node] = target
    return assignment


def projection_assignment(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Nearest of k random Gaussian directions, repaired to equal sizes."""
    capacity = require_divisible(points.shape[0], k)
    directions = rng.standard_normal((points.shape[1], k))
    scores = points @ directions
    return repair_to_capacity(scores, np.argmax(scores, axis=1), capacity)


def round_random_projection(
    res: RelaxationResult,
    A: AffinityMatrix,
    k: int,
    direction: Direction | str,
    trials: int = PROJECTION_TRIALS,
    seed: int = 0,
) -> Partition:
    """Best of `trials` random-projection roundings."""
    if trials < 1:
        raise ValidationError("Random projection needs at least one trial", {"trials": trials})
    direction = Direction(direction)
    points = embed_relaxation(res.Y)
    candidates = (projection_assignment(points, k, _stream(seed, t)) for t in range(trials))
    part, cut = _select_best(candidates, A, k, direction)
    logger.debug("rounding.projection", k=k, direction=direction.value, trials=trials, cut=round(cut, 6))
    return part


# =============================================================================
# Partition schemes
# =============================================================================


class PartitionScheme(StrEnum):
    MINC_UNIT = "minc_unit"
    MINC_COUPLING = "minc_coupling"
    MINC_INVERSE = "minc_inverse"
    MAXC_UNIT = "maxc_unit"
    MAXC_COUPLING = "maxc_coupling"
    MAXC_INVERSE = "maxc_inverse"
    RANDOM = "random"

    @property
    def direction(self) -> Direction | None:
        if self is PartitionScheme.RANDOM:
            return None
        return Direction.MIN if self.value.startswith("minc") else Direction.MAX

    @property
    def affinity(self) -> AffinityScheme | None:
        return {
            "unit": AffinityScheme.UNIT,
            "coupling": AffinityScheme.COUPLING,
            "inverse": AffinityScheme.INVERSE_COUPLING,
        }.get(self.value.split("_")[-1])


@dataclass(frozen=True, eq=False)
class PartitionOutcome:
    """A scheme's partition together with its cut statistics in the scheme's own affinity."""

    scheme: PartitionScheme
    k: int
    partition: Partition
    rounding: str
    bound: float
    feasible: float
    fb: float
    report: SolverReport | None = None


def round_relaxation(
    res: RelaxationResult,
    A: AffinityMatrix,
    rounding: Rounding | str,
    *,
    restarts: int = KMEANS_RESTARTS,
    trials: int = PROJECTION_TRIALS,
    seed: int = 0,
) -> Partition:
    rounding = Rounding(rounding)
    if rounding is Rounding.KMEANS:
        return round_kmeans(res, A, res.k, res.direction, restarts=restarts, seed=seed)
    return round_random_projection(res, A, res.k, res.direction, trials=trials, seed=seed)


def partition_by_scheme(
    mrf: MarkovRandomField,
    scheme: PartitionScheme | str,
    k: int,
    *,
    seed: int,
    rounding: Rounding | str = Rounding.KMEANS,
    restarts: int = KMEANS_RESTARTS,
    trials: int = PROJECTION_TRIALS,
    tol: float = RELAXATION_TOL,
    max_iters: int = RELAXATION_MAX_ITERS,
    solver: str | None = None,
    eps: float = INVERSE_COUPLING_EPS,
) -> PartitionOutcome:
    """
    Partition a model into k equal clusters with one of the seven schemes.

    k = 1 yields the single-cluster partition; the random scheme reports
    NaN bound and ratio with the cut measured in unit affinity.
    """
    scheme = PartitionScheme(scheme)
    require_divisible(mrf.n, k)

    if scheme is PartitionScheme.RANDOM or k == 1:
        part = random_equipartition(mrf.n, k, seed) if k > 1 else Partition.single(mrf.n)
        A = build_affinity(mrf, scheme.affinity or AffinityScheme.UNIT, eps)
        feasible = cut_weight(A, part)
        bound = feasible if k == 1 else float("nan")
        fb = 1.0 if k == 1 else float("nan")
        return PartitionOutcome(scheme, k, part, "none", bound, feasible, fb)

    A = build_affinity(mrf, scheme.affinity, eps)
    res = solve_relaxation(A, k, scheme.direction, tol=tol, max_iters=max_iters, solver=solver)
    part = round_relaxation(res, A, rounding, restarts=restarts, trials=trials, seed=seed)
    feasible = cut_weight(A, part)
    outcome = PartitionOutcome(
        scheme=scheme,
        k=k,
        partition=part,
        rounding=Rounding(rounding).value,
        bound=res.bound,
        feasible=feasible,
        fb=fb_ratio(feasible, res.bound),
        report=res.report,
    )
    logger.info(
        "partition.scheme_done",
        scheme=scheme.value,
        k=k,
        bound=round(res.bound, 4),
        feasible=round(feasible, 4),
        fb=round(outcome.fb, 4),
    )
    return outcome
