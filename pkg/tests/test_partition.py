"""
Tests for partitions, affinity schemes, cut weights and equipartition search
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.exceptions import CapacityError, SerializationError, ValidationError
from src.mrf import MarkovRandomField, RandomModelSpec, generate_random_mrf
from src.partition import (
    AffinityMatrix,
    AffinityScheme,
    Direction,
    Partition,
    brute_force_equipartition,
    build_affinity,
    component_partition,
    count_equipartitions,
    cut_weight,
    cut_weight_trace,
    fb_ratio,
    format_partition,
    iter_equipartitions,
    laplacian,
    load_partition,
    maxcut_via_affinity_identity,
    parse_partition,
    random_equipartition,
    require_divisible,
    save_partition,
    singleton_partition,
)


def four_cycle() -> AffinityMatrix:
    mrf = MarkovRandomField.from_edge_list(4, np.zeros(4), [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)])
    return build_affinity(mrf, AffinityScheme.UNIT)


class TestPartition:
    """Test partition construction and accessors"""

    def test_clusters_ascending(self):
        part = Partition(assignment=[1, 0, 1, 0], k=2)
        assert [c.tolist() for c in part.clusters] == [[1, 3], [0, 2]]
        assert part.sizes.tolist() == [2, 2]
        assert part.is_equipartition
        assert part.cluster_size == 2

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValidationError, match="non-empty"):
            Partition(assignment=[0, 0, 2], k=3)

    def test_id_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            Partition(assignment=[0, 3], k=2)

    def test_from_clusters_requires_cover(self):
        with pytest.raises(ValidationError):
            Partition.from_clusters([[0, 1], [1, 2]])

    def test_unequal_partition_has_no_cluster_size(self):
        part = Partition.from_clusters([[0], [1, 2]])
        assert not part.is_equipartition
        with pytest.raises(ValidationError):
            _ = part.cluster_size

    def test_indicator(self):
        X = Partition(assignment=[0, 1, 0], k=2).indicator()
        assert X.tolist() == [[1, 0], [0, 1], [1, 0]]

    def test_same_as_ignores_labels(self):
        a = Partition(assignment=[0, 0, 1, 1], k=2)
        b = Partition(assignment=[1, 1, 0, 0], k=2)
        c = Partition(assignment=[0, 1, 0, 1], k=2)
        assert a.same_as(b)
        assert not a.same_as(c)

    def test_single_and_singleton(self):
        assert Partition.single(5).k == 1
        part = singleton_partition(4)
        assert part.k == 4 and part.sizes.tolist() == [1, 1, 1, 1]

    def test_component_partition(self):
        mrf = MarkovRandomField.from_edge_list(5, np.zeros(5), [(0, 2, 1.0), (3, 4, -1.0)])
        part = component_partition(mrf)
        assert [c.tolist() for c in part.clusters] == [[0, 2], [1], [3, 4]]

    def test_require_divisible(self):
        assert require_divisible(12, 4) == 3
        with pytest.raises(ValidationError):
            require_divisible(10, 4)
        with pytest.raises(ValidationError):
            require_divisible(3, 4)


class TestAffinity:
    """Test affinity schemes and Laplacian"""

    def setup_method(self):
        self.mrf = MarkovRandomField.from_edge_list(3, np.zeros(3), [(0, 1, -0.5), (1, 2, 0.0), (0, 2, 2.0)])

    def test_unit(self):
        W = build_affinity(self.mrf, "unit").weights
        assert W[0, 1] == 1.0 and W[1, 2] == 1.0 and W[0, 2] == 1.0

    def test_coupling_uses_magnitude(self):
        W = build_affinity(self.mrf, AffinityScheme.COUPLING).weights
        assert W[0, 1] == 0.5 and W[1, 2] == 0.0 and W[2, 0] == 2.0

    def test_inverse_coupling_clamped(self):
        W = build_affinity(self.mrf, AffinityScheme.INVERSE_COUPLING, eps=1e-3).weights
        assert W[0, 1] == pytest.approx(2.0)
        assert W[1, 2] == pytest.approx(1e3)
        assert W[0, 2] == pytest.approx(0.5)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            build_affinity(self.mrf, "squared")

    def test_asymmetric_rejected(self):
        with pytest.raises(ValidationError, match="symmetric"):
            AffinityMatrix(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            AffinityMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))

    def test_total_weight(self):
        assert four_cycle().total_weight == 4.0

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000), p=st.floats(min_value=0.0, max_value=1.0))
    def test_laplacian_rows_sum_to_zero(self, seed, p):
        mrf = generate_random_mrf(RandomModelSpec(n=9, edge_prob=p, seed=seed))
        L = laplacian(build_affinity(mrf, AffinityScheme.COUPLING))
        assert np.allclose(L.sum(axis=1), 0.0)
        assert np.allclose(L, L.T)
        assert np.linalg.eigvalsh(L).min() > -1e-9


class TestCutWeight:
    """Test the three cut formulas"""

    def test_four_cycle_cuts(self):
        A = four_cycle()
        assert cut_weight(A, Partition(assignment=[0, 0, 1, 1], k=2)) == 2.0
        assert cut_weight(A, Partition(assignment=[0, 1, 0, 1], k=2)) == 4.0

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            cut_weight(four_cycle(), Partition.single(3))

    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=10_000),
        k=st.sampled_from([1, 2, 3, 4, 6]),
        scheme=st.sampled_from(list(AffinityScheme)),
    )
    def test_formulas_agree(self, seed, k, scheme):
        mrf = generate_random_mrf(RandomModelSpec(n=12, edge_prob=0.4, seed=seed))
        A = build_affinity(mrf, scheme)
        part = random_equipartition(12, k, seed)
        direct = cut_weight(A, part)
        assert cut_weight_trace(A, part) == pytest.approx(direct, rel=1e-9, abs=1e-9)
        assert maxcut_via_affinity_identity(A, part) == pytest.approx(direct, rel=1e-9, abs=1e-9)

    def test_single_cluster_cuts_nothing(self):
        assert cut_weight(four_cycle(), Partition.single(4)) == 0.0


class TestFbRatio:
    """Test feasible over bound ratio"""

    def test_plain_ratio(self):
        assert fb_ratio(3.0, 2.0) == 1.5

    def test_zero_over_zero(self):
        assert fb_ratio(0.0, 0.0) == 1.0

    def test_positive_over_zero(self):
        assert math.isinf(fb_ratio(1.0, 0.0))


class TestEquipartitions:
    """Test random, counted and enumerated equipartitions"""

    def test_random_equipartition_sizes(self):
        part = random_equipartition(12, 3, seed=4)
        assert part.sizes.tolist() == [4, 4, 4]

    def test_random_equipartition_deterministic(self):
        assert random_equipartition(12, 3, 4).same_as(random_equipartition(12, 3, 4))

    def test_random_equipartition_needs_divisor(self):
        with pytest.raises(ValidationError):
            random_equipartition(10, 3, 0)

    @pytest.mark.parametrize("n,k,expected", [(4, 2, 3), (6, 3, 15), (6, 2, 10), (6, 1, 1), (6, 6, 1)])
    def test_counts(self, n, k, expected):
        assert count_equipartitions(n, k) == expected
        assert sum(1 for _ in iter_equipartitions(n, k)) == expected

    def test_enumerated_partitions_distinct(self):
        seen = {tuple(a) for a in iter_equipartitions(6, 3)}
        assert len(seen) == 15
        assert all(a[0] == 0 for a in seen)

    def test_brute_force_four_cycle(self):
        A = four_cycle()
        _, low = brute_force_equipartition(A, 2, Direction.MIN)
        best, high = brute_force_equipartition(A, 2, "max")
        assert low == 2.0
        assert high == 4.0
        assert best.same_as(Partition(assignment=[0, 1, 0, 1], k=2))

    def test_random_equipartition_uniform(self):
        """Each of the three 2-way splits of 4 nodes should come up about a third of the time."""
        draws = 3000
        partner_counts = np.zeros(4, dtype=int)
        for seed in range(draws):
            assignment = random_equipartition(4, 2, seed).assignment
            (partner,) = [j for j in range(1, 4) if assignment[j] == assignment[0]]
            partner_counts[partner] += 1
        assert partner_counts[1:] / draws == pytest.approx([1 / 3] * 3, abs=0.05)

    def test_brute_force_six_cycle(self):
        mrf = MarkovRandomField.from_edge_list(6, np.zeros(6), [(i, (i + 1) % 6, 1.0) for i in range(6)])
        A = build_affinity(mrf, AffinityScheme.UNIT)
        best, low = brute_force_equipartition(A, 2, Direction.MIN)
        assert low == 2.0
        assert cut_weight(A, best) == 2.0
        assert best.sizes.tolist() == [3, 3]

    def test_brute_force_cap(self):
        A = AffinityMatrix(np.zeros((12, 12)))
        with pytest.raises(CapacityError):
            brute_force_equipartition(A, 2, Direction.MIN, cap=10)


class TestPartitionFiles:
    """Test partition file format"""

    def test_format(self):
        assert format_partition(Partition(assignment=[1, 0], k=2)) == "2\n0 1\n1 0\n"

    def test_save_load(self, tmp_path):
        part = random_equipartition(8, 4, seed=1)
        loaded = load_partition(save_partition(part, tmp_path / "partition.txt"))
        assert np.array_equal(loaded.assignment, part.assignment)
        assert loaded.k == 4

    def test_lines_in_any_order(self):
        part = parse_partition("2\n1 0\n0 1\n")
        assert part.assignment.tolist() == [1, 0]

    def test_missing_node(self):
        with pytest.raises(SerializationError):
            parse_partition("2\n0 0\n2 1\n")

    def test_empty_cluster(self):
        with pytest.raises(SerializationError):
            parse_partition("3\n0 0\n1 1\n")

    def test_malformed(self):
        with pytest.raises(SerializationError):
            parse_partition("two\n0 0\n")

    def test_missing_file(self, tmp_path):
        with pytest.raises(SerializationError, match="not found"):
            load_partition(tmp_path / "nope.txt")
