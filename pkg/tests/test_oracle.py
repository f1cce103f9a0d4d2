"""
Tests for exact enumeration of log Z, marginals and KL divergences
"""

import itertools

import numpy as np
import pytest
from scipy.special import logsumexp

from src.exceptions import CapacityError, NormalizationError
from src.gmf import GmfState, gmf_lower_bound, run_gmf
from src.mrf import MarkovRandomField, RandomModelSpec, generate_random_mrf, log_unnormalized_prob
from src.oracle import (
    enumerate_log_probs,
    enumeration_kl,
    exact_kl_of_product,
    exact_summary,
    product_probs,
)
from src.partition import Partition, component_partition, random_equipartition, singleton_partition


def blockwise_oracle(mrf: MarkovRandomField, block_bits: int = 14) -> tuple[float, np.ndarray]:
    """log Z and P(X_i=+1) from the edge list, one block of low states at a time."""
    n = mrf.n
    low = min(n, block_bits)
    low_codes = np.arange(2**low)

    def block(high: int) -> tuple[np.ndarray, np.ndarray]:
        codes = (high << low) | low_codes
        X = 2.0 * ((codes[:, None] >> np.arange(n)) & 1) - 1.0
        log_w = X @ mrf.theta_node
        for (i, j), t in zip(mrf.edges, mrf.theta_edge, strict=True):
            log_w += t * X[:, i] * X[:, j]
        return X, log_w

    blocks = range(2 ** (n - low))
    log_z = float(logsumexp([logsumexp(block(h)[1]) for h in blocks]))
    means = np.zeros(n)
    for h in blocks:
        X, log_w = block(h)
        means += X.T @ np.exp(log_w - log_z)
    return log_z, 0.5 * (1.0 + means)


def chain_log_partition(theta_node, theta_edge) -> float:
    """Transfer-matrix log Z of a chain."""
    spins = np.array([-1.0, 1.0])
    message = np.exp(theta_node[0] * spins)
    for i, t in enumerate(theta_edge):
        transfer = np.exp(t * np.outer(spins, spins)) * np.exp(theta_node[i + 1] * spins)[None, :]
        message = message @ transfer
    return float(np.log(message.sum()))


class TestExactSummary:
    """Test log Z and singleton marginals"""

    def test_single_free_node(self):
        result = exact_summary(MarkovRandomField.from_edge_list(1, [0.0]))
        assert result.log_partition == pytest.approx(np.log(2))
        assert result.singleton_marginals == pytest.approx([0.5])

    @pytest.mark.parametrize("t", [-1.5, 0.3, 2.0])
    def test_single_node_with_field(self, t):
        result = exact_summary(MarkovRandomField.from_edge_list(1, [t]))
        assert result.log_partition == pytest.approx(np.log(2 * np.cosh(t)), abs=1e-12)
        assert result.singleton_marginals[0] == pytest.approx(1 / (1 + np.exp(-2 * t)), abs=1e-12)

    @pytest.mark.parametrize("theta_node", [[0.0, 0.0, 0.0], [0.4, -0.7, 0.1]])
    def test_three_node_chain(self, theta_node):
        theta_edge = [1.1, -0.6]
        mrf = MarkovRandomField.from_edge_list(3, theta_node, [(0, 1, 1.1), (1, 2, -0.6)])
        result = exact_summary(mrf)
        assert result.log_partition == pytest.approx(chain_log_partition(theta_node, theta_edge), abs=1e-12)

        weights = {x: np.exp(log_unnormalized_prob(mrf, x)) for x in itertools.product([-1, 1], repeat=3)}
        z = sum(weights.values())
        expected = [sum(w for x, w in weights.items() if x[i] == 1) / z for i in range(3)]
        assert result.singleton_marginals == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("n,seed", [(18, 1), (21, 2)])
    def test_matches_blockwise_oracle(self, n, seed):
        mrf = generate_random_mrf(RandomModelSpec(n=n, edge_prob=0.3, w_coup=1.0, seed=seed))
        log_z, marginals = blockwise_oracle(mrf)
        result = exact_summary(mrf)
        assert result.log_partition == pytest.approx(log_z, abs=1e-9)
        assert result.singleton_marginals == pytest.approx(marginals, abs=1e-9)

    def test_worker_count_does_not_change_result(self):
        mrf = generate_random_mrf(RandomModelSpec(n=22, edge_prob=0.25, w_coup=2.0, seed=3))
        one = exact_summary(mrf, workers=1)
        three = exact_summary(mrf, workers=3)
        assert one.log_partition == three.log_partition
        assert np.array_equal(one.singleton_marginals, three.singleton_marginals)

    def test_capacity(self):
        mrf = MarkovRandomField.from_edge_list(6, np.zeros(6))
        with pytest.raises(CapacityError):
            exact_summary(mrf, limit=5)

    def test_log_partition_above_max_weight(self):
        mrf = generate_random_mrf(RandomModelSpec(n=10, edge_prob=0.5, w_coup=3.0, seed=4))
        result = exact_summary(mrf)
        assert result.log_partition >= result.max_log_weight
        assert np.all((result.singleton_marginals >= 0) & (result.singleton_marginals <= 1))


class TestEnumerateLogProbs:
    """Test the full state table"""

    def test_normalized(self):
        mrf = generate_random_mrf(RandomModelSpec(n=8, edge_prob=0.5, seed=5))
        assert logsumexp(enumerate_log_probs(mrf)) == pytest.approx(0.0, abs=1e-12)

    def test_state_order(self):
        mrf = generate_random_mrf(RandomModelSpec(n=17, edge_prob=0.2, seed=6))
        log_p = enumerate_log_probs(mrf)
        log_z = exact_summary(mrf).log_partition
        for s in (0, 1, 5, 2**16, 2**17 - 1, 98765):
            x = np.where((s >> np.arange(17)) & 1, 1, -1)
            assert log_p[s] == pytest.approx(log_unnormalized_prob(mrf, x) - log_z, abs=1e-10)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            enumerate_log_probs(MarkovRandomField.from_edge_list(4, np.zeros(4)), limit=3)


class TestKlOfProduct:
    """Test KL(q || p) for cluster product distributions"""

    def test_component_aligned_q_is_exact(self):
        mrf = MarkovRandomField.from_edge_list(5, [0.2, 0.1, -0.3, 0.0, 0.4], [(0, 1, 1.0), (2, 3, -1.2), (3, 4, 0.7)])
        state, _ = run_gmf(mrf, component_partition(mrf))
        log_z = exact_summary(mrf).log_partition
        assert exact_kl_of_product(mrf, state, log_z) == pytest.approx(0.0, abs=1e-10)

    def test_uniform_q_on_single_node(self):
        t = 0.8
        mrf = MarkovRandomField.from_edge_list(1, [t])
        state = GmfState.uniform(Partition.single(1))
        log_z = exact_summary(mrf).log_partition
        assert exact_kl_of_product(mrf, state, log_z) == pytest.approx(np.log(2 * np.cosh(t)) - np.log(2), abs=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 5, 10])
    def test_matches_enumeration(self, k):
        mrf = generate_random_mrf(RandomModelSpec(n=10, edge_prob=0.5, w_coup=1.5, seed=7))
        state = GmfState.random(random_equipartition(10, k, seed=7), seed=11, mix=1.0)
        log_z = exact_summary(mrf).log_partition
        assert exact_kl_of_product(mrf, state, log_z) == pytest.approx(enumeration_kl(mrf, state), abs=1e-8)

    def test_identity_with_lower_bound(self):
        mrf = generate_random_mrf(RandomModelSpec(n=9, edge_prob=0.5, seed=8))
        state, _ = run_gmf(mrf, singleton_partition(9))
        log_z = exact_summary(mrf).log_partition
        kl = exact_kl_of_product(mrf, state, log_z)
        assert kl >= -1e-12
        assert gmf_lower_bound(mrf, state) == pytest.approx(log_z - kl, abs=1e-12)

    def test_unnormalized_table_rejected(self):
        mrf = MarkovRandomField.from_edge_list(1, [0.0])
        state = GmfState(Partition.single(1), [np.array([0.5, 0.6])])
        with pytest.raises(NormalizationError):
            exact_kl_of_product(mrf, state, np.log(2))

    def test_product_probs_sum_to_one(self):
        state = GmfState.random(random_equipartition(8, 4, seed=9), seed=9)
        q = product_probs(state)
        assert q.sum() == pytest.approx(1.0, abs=1e-12)
        assert q.shape == (256,)
