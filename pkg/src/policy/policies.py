import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from chain.transitions import feasibility_mask
from model.parameters import SystemParams
from model.states import StateSpace
from utils.exceptions import InvalidArgumentError

BASELINES = ('local', 'cloud', 'greedy')
NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class Policy:
    """Stochastic scheduling policy: row s holds (g1, g2, g3, g4) for state index s."""
    space: StateSpace
    table: np.ndarray
    name: str = 'custom'

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.shape != (self.space.size, 4):
            raise InvalidArgumentError(
                f"policy table has shape {table.shape}, expected ({self.space.size}, 4)")
        table.setflags(write=False)
        object.__setattr__(self, 'table', table)

    def row(self, state) -> np.ndarray:
        return self.table[self.space.index(state)]

    @classmethod
    def idle(cls, space: StateSpace, name: str = 'idle') -> "Policy":
        table = np.zeros((space.size, 4))
        table[:, 3] = 1.0
        return cls(space=space, table=table, name=name)


@dataclass(frozen=True)
class PolicyViolation:
    state: tuple
    k: Optional[int]
    kind: str
    value: float


def _one_hot(space, choice):
    table = np.zeros((space.size, 4))
    table[np.arange(space.size), choice - 1] = 1.0
    return table


def make_baseline(name: str, params: SystemParams) -> Policy:
    """Deterministic reference policies: local-only, cloud-only and greedy"""
    space = StateSpace.from_params(params)
    mask = feasibility_mask(space)
    choice = np.full(space.size, 4)

    if name == 'local':
        choice[mask[:, 0]] = 1
    elif name == 'cloud':
        choice[mask[:, 1]] = 2
    elif name == 'greedy':
        only_local = mask[:, 0] & ~mask[:, 1]
        only_cloud = mask[:, 1] & ~mask[:, 0]
        single_task = mask[:, 0] & mask[:, 1] & ~mask[:, 2]
        choice[only_local] = 1
        choice[only_cloud] = 2
        # one queued task and both units idle: the unit that finishes sooner on average
        choice[single_task] = 2 if params.t_c < params.local_slots else 1
        choice[mask[:, 2]] = 3
    else:
        logging.error(f"Unknown baseline policy: {name}")
        raise InvalidArgumentError(f"unknown baseline policy '{name}', expected one of {BASELINES}")

    return Policy(space=space, table=_one_hot(space, choice), name=name)


def validate(policy: Policy, params: SystemParams) -> List[PolicyViolation]:
    """List every (state, decision) breaking non-negativity, normalisation or feasibility"""
    space = StateSpace.from_params(params)
    if policy.table.shape != (space.size, 4):
        return [PolicyViolation(state=(), k=None, kind='shape', value=float(space.size))]

    mask = feasibility_mask(space)
    table = policy.table
    violations = []

    for s, k in zip(*np.nonzero(table < 0)):
        violations.append(PolicyViolation(tuple(space[s]), int(k) + 1, 'negative', float(table[s, k])))
    for s, k in zip(*np.nonzero(~mask & (table != 0))):
        violations.append(PolicyViolation(tuple(space[s]), int(k) + 1, 'infeasible', float(table[s, k])))
    totals = table.sum(axis=1)
    for s in np.flatnonzero(np.abs(totals - 1.0) > NORMALIZATION_TOL):
        violations.append(PolicyViolation(tuple(space[s]), None, 'normalization', float(totals[s])))

    if violations:
        logging.warning(f"Policy '{policy.name}' has {len(violations)} violations")
    return violations


def sample_random_policy(space: StateSpace, rng: np.random.Generator, name: str = 'random') -> Policy:
    """Dirichlet(1) draw over the feasible decisions of every state"""
    mask = feasibility_mask(space)
    draws = rng.gamma(1.0, size=(space.size, 4)) * mask
    table = draws / draws.sum(axis=1, keepdims=True)
    return Policy(space=space, table=table, name=name)
