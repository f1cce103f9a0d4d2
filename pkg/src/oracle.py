"""
Exact inference by exhaustive enumeration.

The state space is split into ENUM_LOW_BITS low-order nodes, evaluated as one
vectorized block of 2^L configurations, and the remaining high-order nodes,
walked in Gray-code order so consecutive high states differ by one spin flip.
High states are grouped into fixed-size chunks; each chunk computes its own
start state, accumulates (max, sum, first moments) relative to its local
max, and the chunks are merged in index order. The result does not depend on
how many worker threads process the chunks.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, rel_entr

from .constants import (
    ENUM_CHUNK_BLOCKS,
    ENUM_LOW_BITS,
    ENUMERATION_LIMIT,
    NORMALIZATION_TOL,
    STATE_TABLE_LIMIT,
)
from .exceptions import CapacityError
from .gmf import GmfState, gmf_lower_bound, local_spins
from .logger import logger
from .mrf import MarkovRandomField


@dataclass(frozen=True, eq=False)
class ExactSummary:
    """log Z_p and P(X_i = +1) for every node."""

    log_partition: float
    singleton_marginals: np.ndarray
    max_log_weight: float


@dataclass(frozen=True)
class _ChunkPartial:
    max_log: float
    total: float
    moments: np.ndarray


def _require_capacity(mrf: MarkovRandomField, limit: int) -> None:
    if mrf.n > limit:
        raise CapacityError("Model too large for exact enumeration", {"limit": limit, "requested": mrf.n})


def _gray(t: int) -> int:
    return t ^ (t >> 1)


def _high_spins(code: int, width: int) -> np.ndarray:
    return 2.0 * ((code >> np.arange(width)) & 1) - 1.0


class _Enumerator:
    """Precomputed low block and high-order coupling pieces of one model."""

    def __init__(self, mrf: MarkovRandomField):
        n = mrf.n
        self.low_bits = min(n, ENUM_LOW_BITS)
        self.high_bits = n - self.low_bits
        L = self.low_bits
        J = mrf.coupling_matrix

        self.spins_low = local_spins(L)
        self.energy_low = self.spins_low @ mrf.theta_node[:L] + 0.5 * np.einsum(
            "si,ij,sj->s", self.spins_low, J[:L, :L], self.spins_low
        )
        self.theta_high = mrf.theta_node[L:]
        self.J_high = J[L:, L:]
        self.cross = J[L:, :L]  # high x low
        self.num_chunks = -(-(2**self.high_bits) // ENUM_CHUNK_BLOCKS)

    def chunk_states(self, chunk: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """High spins, high energies and low-node fields for every Gray step in a chunk."""
        start = chunk * ENUM_CHUNK_BLOCKS
        stop = min(start + ENUM_CHUNK_BLOCKS, 2**self.high_bits)
        H = self.high_bits

        h = _high_spins(_gray(start), H)
        e = float(self.theta_high @ h + 0.5 * h @ self.J_high @ h)
        field = h @ self.cross

        spins, energies, fields = [h.copy()], [e], [field.copy()]
        for t in range(start + 1, stop):
            b = int(_gray(t) ^ _gray(t - 1)).bit_length() - 1
            # Flipping spin b: local field of b excludes the zero diagonal
            e -= 2.0 * h[b] * (self.theta_high[b] + self.J_high[b] @ h)
            field -= 2.0 * h[b] * self.cross[b]
            h[b] = -h[b]
            spins.append(h.copy())
            energies.append(e)
            fields.append(field.copy())
        return np.array(spins).reshape(len(spins), H), np.array(energies), np.array(fields)

    def chunk_log_weights(self, chunk: int) -> tuple[np.ndarray, np.ndarray]:
        high, e_high, fields = self.chunk_states(chunk)
        log_w = self.energy_low[None, :] + e_high[:, None] + fields @ self.spins_low.T
        return high, log_w

    def chunk_partial(self, chunk: int) -> _ChunkPartial:
        high, log_w = self.chunk_log_weights(chunk)
        top = float(log_w.max())
        w = np.exp(log_w - top)
        moments = np.concatenate((w.sum(axis=0) @ self.spins_low, w.sum(axis=1) @ high))
        return _ChunkPartial(max_log=top, total=float(w.sum()), moments=moments)


def _merge(partials: list[_ChunkPartial]) -> tuple[float, float, np.ndarray]:
    """Running-max log-sum-exp merge in chunk order."""
    top, total, moments = -np.inf, 0.0, None
    for part in partials:
        if part.max_log > top:
            scale = np.exp(top - part.max_log) if np.isfinite(top) else 0.0
            total = total * scale + part.total
            moments = part.moments.copy() if moments is None else moments * scale + part.moments
            top = part.max_log
        else:
            scale = np.exp(part.max_log - top)
            total += part.total * scale
            moments += part.moments * scale
    return top, total, moments


def exact_summary(mrf: MarkovRandomField, limit: int = ENUMERATION_LIMIT, workers: int = 1) -> ExactSummary:
    """
    Exact log Z_p and singleton marginals by enumeration of all 2^n states.

    Raises:
        CapacityError: n exceeds `limit`
    """
    _require_capacity(mrf, limit)
    enumerator = _Enumerator(mrf)
    chunks = range(enumerator.num_chunks)

    if workers > 1 and enumerator.num_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(enumerator.chunk_partial, chunks))
    else:
        partials = [enumerator.chunk_partial(c) for c in chunks]

    top, total, moments = _merge(partials)
    marginals = np.clip(0.5 * (1.0 + moments / total), 0.0, 1.0)
    log_z = top + float(np.log(total))
    logger.debug("oracle.enumerated", n=mrf.n, chunks=enumerator.num_chunks, workers=workers, log_z=round(log_z, 6))
    return ExactSummary(log_partition=log_z, singleton_marginals=marginals, max_log_weight=top)


def enumerate_log_probs(mrf: MarkovRandomField, limit: int = STATE_TABLE_LIMIT) -> np.ndarray:
    """
    Normalized log p(x) for all 2^n states.

    State s has spin +1 at node i iff bit i of s is set.
    """
    _require_capacity(mrf, limit)
    enumerator = _Enumerator(mrf)
    blocks = []
    for chunk in range(enumerator.num_chunks):
        high, log_w = enumerator.chunk_log_weights(chunk)
        codes = ((high > 0).astype(np.int64) << np.arange(enumerator.high_bits)).sum(axis=1)
        blocks.append((codes, log_w))

    table = np.empty((2**enumerator.high_bits, 2**enumerator.low_bits))
    for codes, log_w in blocks:
        table[codes] = log_w
    log_w = table.reshape(-1)
    return log_w - logsumexp(log_w)


def product_probs(state: GmfState) -> np.ndarray:
    """q(x) for all 2^n states in the same order as enumerate_log_probs."""
    n = state.partition.n
    states = np.arange(2**n)
    q = np.ones(2**n)
    for nodes, table in zip(state.partition.clusters, state.tables, strict=True):
        local = np.zeros(2**n, dtype=np.int64)
        for j, node in enumerate(nodes):
            local |= ((states >> node) & 1) << j
        q *= table[local]
    return q


def exact_kl_of_product(mrf: MarkovRandomField, q: GmfState, log_z: float) -> float:
    """
    KL(q || p) = log Z_p - (E_q[log p~] + H(q)) by clique decomposition.

    Raises:
        NormalizationError: a cluster table is not normalized
    """
    q.validate(NORMALIZATION_TOL)
    return float(log_z - gmf_lower_bound(mrf, q))


def enumeration_kl(mrf: MarkovRandomField, q: GmfState, limit: int = STATE_TABLE_LIMIT) -> float:
    """sum_x q(x) log(q(x) / p(x)) over all states."""
    q.validate(NORMALIZATION_TOL)
    log_p = enumerate_log_probs(mrf, limit)
    return float(rel_entr(product_probs(q), np.exp(log_p)).sum())
