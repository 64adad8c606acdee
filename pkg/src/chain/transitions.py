"""Slot-level dynamics of the device: buffer, local CPU and transmission unit.

`step` is the single source of truth for the update; the decision-conditioned
kernel and the policy-averaged transition matrix are both built from it.
"""
import logging
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sps

from model.parameters import SystemParams
from model.states import StateSpace, SysState
from utils.exceptions import FeasibilityError


class Decision(IntEnum):
    LOCAL = 1   # (v_C, v_L) = (0, 1)
    CLOUD = 2   # (1, 0)
    BOTH = 3    # (1, 1)
    IDLE = 4    # (0, 0)

    @property
    def v_c(self) -> int:
        return 1 if self in (Decision.CLOUD, Decision.BOTH) else 0

    @property
    def v_l(self) -> int:
        return 1 if self in (Decision.LOCAL, Decision.BOTH) else 0


DECISIONS = tuple(Decision)


def feasible(state, k) -> bool:
    q, c_t, c_l = state
    k = Decision(k)
    if k == Decision.LOCAL:
        return q >= 1 and c_l == 0
    if k == Decision.CLOUD:
        return q >= 1 and c_t == 0
    if k == Decision.BOTH:
        return q >= 2 and c_l == 0 and c_t == 0
    return True


def feasibility_mask(space: StateSpace) -> np.ndarray:
    """|S| x 4 boolean table, column k-1 tells whether decision k is allowed"""
    mask = np.ones((space.size, 4), dtype=bool)
    mask[:, 0] = (space.q >= 1) & (space.c_l == 0)
    mask[:, 1] = (space.q >= 1) & (space.c_t == 0)
    mask[:, 2] = (space.q >= 2) & (space.c_l == 0) & (space.c_t == 0)
    return mask


def wrap(x: int, k: int) -> int:
    """State mapping: x for x < k, 0 once the counter reaches k"""
    return x if x < k else 0


def step(state, k, arrival: int, channel_ok: int, params: SystemParams) -> SysState:
    """Deterministic one-slot update given the decision and the (arrival, channel) outcome"""
    if not feasible(state, k):
        raise FeasibilityError(f"decision {int(k)} is not feasible in state {tuple(state)}")
    q, c_t, c_l = state
    k = Decision(k)
    n_cpu = params.local_slots
    n_tu = params.packets_per_task + 1

    q_next = min(q - k.v_l - k.v_c + arrival, params.buffer_cap)

    if c_l > 0:
        c_l_next = wrap(c_l + 1, n_cpu)
    elif k.v_l:
        c_l_next = wrap(1, n_cpu)
    else:
        c_l_next = 0

    packet = c_t if c_t > 0 else k.v_c
    if packet == 0:
        c_t_next = 0
    elif channel_ok:
        c_t_next = wrap(packet + 1, n_tu)
    else:
        c_t_next = packet

    return SysState(q_next, c_t_next, c_l_next)


@dataclass(frozen=True)
class DecisionKernel:
    """Decision-conditioned transition probabilities.

    Row p of `matrix` is the next-state distribution for the feasible pair
    (pairs[p, 0], pairs[p, 1]) = (state index, decision k).
    """
    space: StateSpace
    pairs: np.ndarray
    matrix: sps.csr_matrix
    mask: np.ndarray

    @property
    def pair_count(self) -> int:
        return self.pairs.shape[0]

    def pair_index(self, state_index: int, k: int) -> int:
        hits = np.flatnonzero((self.pairs[:, 0] == state_index) & (self.pairs[:, 1] == int(k)))
        if hits.size == 0:
            raise FeasibilityError(f"no kernel row for state {state_index} and decision {int(k)}")
        return int(hits[0])

    def row(self, state_index: int, k: int) -> Dict[int, float]:
        """Next-state distribution {state index: probability} for one (state, decision)"""
        r = self.matrix.getrow(self.pair_index(state_index, k))
        return {int(j): float(v) for j, v in zip(r.indices, r.data)}


def _outcomes(params: SystemParams) -> List[Tuple[int, int, float]]:
    alpha, beta = params.alpha, params.beta
    return [(a, s, (alpha if a else 1.0 - alpha) * (beta if s else 1.0 - beta))
            for a in (0, 1) for s in (0, 1)]


@lru_cache(maxsize=32)
def decision_kernel(params: SystemParams) -> DecisionKernel:
    """Enumerate every (arrival, channel) outcome through `step` and merge common destinations"""
    space = StateSpace.from_params(params)
    mask = feasibility_mask(space)
    outcomes = _outcomes(params)

    pairs, rows, cols, vals = [], [], [], []
    for s_idx, state in enumerate(space.states):
        for k in DECISIONS:
            if not mask[s_idx, k - 1]:
                continue
            merged = {}
            for arrival, channel_ok, weight in outcomes:
                if weight == 0.0:
                    continue
                dest = space.index(step(state, k, arrival, channel_ok, params))
                merged[dest] = merged.get(dest, 0.0) + weight
            p = len(pairs)
            pairs.append((s_idx, int(k)))
            for dest in sorted(merged):
                rows.append(p)
                cols.append(dest)
                vals.append(merged[dest])

    matrix = sps.csr_matrix((vals, (rows, cols)), shape=(len(pairs), space.size))
    logging.debug(f"Decision kernel: {space.size} states, {len(pairs)} feasible pairs")
    return DecisionKernel(space=space, pairs=np.array(pairs, dtype=int), matrix=matrix, mask=mask)


def policy_kernel(kernel: DecisionKernel, policy) -> sps.csr_matrix:
    """chi[s, s'] = sum_k g_s^k * chi~[s, s', k], a sparse row-stochastic matrix"""
    table = policy.table
    weights = table[kernel.pairs[:, 0], kernel.pairs[:, 1] - 1]
    selector = sps.csr_matrix(
        (weights, (kernel.pairs[:, 0], np.arange(kernel.pair_count))),
        shape=(kernel.space.size, kernel.pair_count),
    )
    chi = (selector @ kernel.matrix).tocsr()
    chi.eliminate_zeros()
    return chi


def dump_matrix(matrix, path) -> None:
    """Write a transition matrix as `row col probability` lines"""
    coo = sps.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, 'w', encoding='utf-8') as handle:
        for i in order:
            handle.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")
    logging.info(f"Transition matrix with {coo.nnz} entries written to {path}")
