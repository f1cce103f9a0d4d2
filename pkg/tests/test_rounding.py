"""
Tests for relaxation rounding and the partition schemes
"""

import inspect
import math

import numpy as np
import pytest

from src.constants import RELAXATION_MAX_ITERS, RELAXATION_TOL
from src.exceptions import ValidationError
from src.mrf import MarkovRandomField, RandomModelSpec, generate_random_mrf
from src.partition import (
    AffinityScheme,
    Direction,
    Partition,
    brute_force_equipartition,
    build_affinity,
    cut_weight,
)
from src.relaxation import RelaxationResult, SolverReport
from src.rounding import (
    PartitionScheme,
    Rounding,
    balanced_assign,
    embed_relaxation,
    equal_size_kmeans,
    partition_by_scheme,
    projection_assignment,
    repair_to_capacity,
    round_kmeans,
    round_random_projection,
    round_relaxation,
)

REPORT = SolverReport("none", "optimal", 0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def block_relaxation(assignment, direction=Direction.MIN) -> RelaxationResult:
    labels = np.asarray(assignment)
    Y = (labels[:, None] == labels[None, :]).astype(float)
    return RelaxationResult(Y=Y, bound=0.0, direction=direction, k=int(labels.max()) + 1, report=REPORT)


def two_cliques_model() -> MarkovRandomField:
    edges = [(i, j, 1.0) for block in ((0, 2, 5, 7), (1, 3, 4, 6)) for i in block for j in block if i < j]
    return MarkovRandomField.from_edge_list(8, np.zeros(8), edges)


class TestBalancedAssign:
    """Test capacity-constrained greedy assignment"""

    def test_respects_capacity(self):
        distances = np.array([[0.0, 5.0], [0.1, 5.0], [0.2, 5.0], [0.3, 5.0]])
        assert balanced_assign(distances, 2).tolist() == [0, 0, 1, 1]

    def test_ties_by_node_then_cluster(self):
        assert balanced_assign(np.zeros((4, 2)), 2).tolist() == [0, 0, 1, 1]

    def test_prefers_closest(self):
        distances = np.array([[3.0, 0.0], [0.0, 3.0]])
        assert balanced_assign(distances, 1).tolist() == [1, 0]


class TestKmeans:
    """Test equal-size K-means and its rounding"""

    def test_separated_points(self):
        points = np.array([[0, 0], [10, 10], [0, 0.1], [-10, 5], [10, 10.1], [-10, 5.1]], dtype=float)
        assignment = equal_size_kmeans(points, 3, np.random.default_rng(0))
        part = Partition(assignment=assignment, k=3)
        assert part.same_as(Partition(assignment=[0, 1, 0, 2, 1, 2], k=3))

    def test_embedding_reproduces_block_solution(self):
        res = block_relaxation([0, 1, 0, 1, 2, 2])
        X = embed_relaxation(res.Y)
        assert np.allclose(X @ X.T, res.Y, atol=1e-10)

    def test_recovers_block_partition(self):
        assignment = [0, 1, 0, 1, 1, 0, 1, 0]
        mrf = two_cliques_model()
        A = build_affinity(mrf, AffinityScheme.UNIT)
        part = round_kmeans(block_relaxation(assignment), A, 2, Direction.MIN, restarts=3, seed=1)
        assert part.same_as(Partition(assignment=assignment, k=2))
        assert cut_weight(A, part) == 0.0

    def test_needs_restart(self):
        with pytest.raises(ValidationError):
            round_kmeans(block_relaxation([0, 1]), build_affinity(two_cliques_model(), "unit"), 2, "min", restarts=0)


class TestRandomProjection:
    """Test random-projection rounding"""

    def test_repair_moves_least_margin(self):
        scores = np.array([[5.0, 0.0], [1.0, 0.9], [4.0, 0.0], [0.0, 3.0]])
        repaired = repair_to_capacity(scores, np.array([0, 0, 0, 1]), capacity=2)
        assert repaired.tolist() == [0, 1, 0, 1]

    def test_repair_keeps_balanced_input(self):
        scores = np.zeros((4, 2))
        assert repair_to_capacity(scores, np.array([1, 0, 1, 0]), 2).tolist() == [1, 0, 1, 0]

    def test_sizes_equal(self):
        points = np.random.default_rng(2).standard_normal((12, 5))
        assignment = projection_assignment(points, 4, np.random.default_rng(3))
        assert np.bincount(assignment, minlength=4).tolist() == [3, 3, 3, 3]

    def test_deterministic(self):
        mrf = generate_random_mrf(RandomModelSpec(n=8, edge_prob=0.5, seed=4))
        A = build_affinity(mrf, AffinityScheme.UNIT)
        res = block_relaxation([0, 0, 1, 1, 2, 2, 3, 3])
        a = round_random_projection(res, A, 4, Direction.MAX, trials=10, seed=5)
        b = round_random_projection(res, A, 4, Direction.MAX, trials=10, seed=5)
        assert np.array_equal(a.assignment, b.assignment)

    def test_needs_trial(self):
        with pytest.raises(ValidationError):
            round_random_projection(block_relaxation([0, 1]), build_affinity(two_cliques_model(), "unit"), 2, "min", 0)

    def test_round_relaxation_dispatch(self):
        A = build_affinity(two_cliques_model(), AffinityScheme.UNIT)
        res = block_relaxation([0, 1, 0, 1, 1, 0, 1, 0])
        part = round_relaxation(res, A, Rounding.RANDOM_PROJECTION, trials=5, seed=0)
        assert part.sizes.tolist() == [4, 4]


class TestPartitionScheme:
    """Test scheme naming"""

    @pytest.mark.parametrize(
        "scheme,direction,affinity",
        [
            ("minc_unit", Direction.MIN, AffinityScheme.UNIT),
            ("minc_coupling", Direction.MIN, AffinityScheme.COUPLING),
            ("minc_inverse", Direction.MIN, AffinityScheme.INVERSE_COUPLING),
            ("maxc_unit", Direction.MAX, AffinityScheme.UNIT),
            ("maxc_coupling", Direction.MAX, AffinityScheme.COUPLING),
            ("maxc_inverse", Direction.MAX, AffinityScheme.INVERSE_COUPLING),
            ("random", None, None),
        ],
    )
    def test_properties(self, scheme, direction, affinity):
        s = PartitionScheme(scheme)
        assert s.direction == direction
        assert s.affinity == affinity


class TestPartitionByScheme:
    """Test the end-to-end partition engine"""

    def test_random_scheme_has_no_bound(self):
        mrf = generate_random_mrf(RandomModelSpec(n=8, edge_prob=0.5, seed=6))
        outcome = partition_by_scheme(mrf, "random", 4, seed=6)
        assert math.isnan(outcome.bound) and math.isnan(outcome.fb)
        assert outcome.partition.sizes.tolist() == [2, 2, 2, 2]
        assert outcome.feasible == cut_weight(build_affinity(mrf, "unit"), outcome.partition)

    def test_single_cluster(self):
        mrf = generate_random_mrf(RandomModelSpec(n=6, edge_prob=0.5, seed=7))
        outcome = partition_by_scheme(mrf, PartitionScheme.MAXC_COUPLING, 1, seed=7)
        assert outcome.partition.k == 1
        assert outcome.feasible == 0.0 and outcome.fb == 1.0

    def test_k_must_divide(self):
        mrf = generate_random_mrf(RandomModelSpec(n=6, edge_prob=0.5, seed=7))
        with pytest.raises(ValidationError):
            partition_by_scheme(mrf, "minc_unit", 4, seed=0)

    def test_recovers_components(self):
        outcome = partition_by_scheme(two_cliques_model(), PartitionScheme.MINC_UNIT, 2, seed=8, restarts=5)
        assert outcome.feasible == 0.0
        assert outcome.partition.same_as(Partition(assignment=[0, 1, 0, 1, 1, 0, 1, 0], k=2))

    @pytest.mark.parametrize("rounding", ["kmeans", "rp"])
    def test_deterministic(self, rounding):
        mrf = generate_random_mrf(RandomModelSpec(n=12, edge_prob=0.4, seed=9))
        a = partition_by_scheme(mrf, "maxc_coupling", 3, seed=9, rounding=rounding, restarts=4, trials=20)
        b = partition_by_scheme(mrf, "maxc_coupling", 3, seed=9, rounding=rounding, restarts=4, trials=20)
        assert np.array_equal(a.partition.assignment, b.partition.assignment)
        assert a.rounding == rounding

    @pytest.mark.slow
    def test_relaxation_sandwich_on_random_graphs(self):
        """Relaxation bound, exact optimum and rounded cut must be ordered on 50 graphs of 8, 10 and 12 nodes."""
        sizes = (8, 10, 12)
        for seed in range(50):
            n = sizes[seed % len(sizes)]
            mrf = generate_random_mrf(RandomModelSpec(n=n, edge_prob=0.4, w_coup=1.0, seed=seed))
            for scheme in (PartitionScheme.MINC_COUPLING, PartitionScheme.MAXC_COUPLING):
                outcome = partition_by_scheme(mrf, scheme, 2, seed=seed, restarts=5)
                A = build_affinity(mrf, scheme.affinity)
                _, optimum = brute_force_equipartition(A, 2, scheme.direction)
                if scheme.direction is Direction.MIN:
                    assert outcome.bound <= optimum + 1e-6, (n, seed, scheme)
                    assert optimum <= outcome.feasible + 1e-9, (n, seed, scheme)
                else:
                    assert outcome.bound >= optimum - 1e-6, (n, seed, scheme)
                    assert optimum >= outcome.feasible - 1e-9, (n, seed, scheme)

    def test_relaxation_defaults_follow_constants(self):
        """Solver tolerance and iteration cap default to the shared relaxation settings."""
        params = inspect.signature(partition_by_scheme).parameters
        assert params["tol"].default == RELAXATION_TOL
        assert params["max_iters"].default == RELAXATION_MAX_ITERS
