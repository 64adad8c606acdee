from typing import List, NamedTuple

import numpy as np

from model.parameters import SystemParams


class SysState(NamedTuple):
    q: int
    c_t: int
    c_l: int


class StateSpace:
    """Lexicographic (q, c_t, c_l) enumeration of the chain's states with a bijective index."""

    def __init__(self, buffer_cap: int, packets_per_task: int, local_slots: int):
        self.buffer_cap = buffer_cap
        self.packets_per_task = packets_per_task
        self.local_slots = local_slots
        self.size = (buffer_cap + 1) * (packets_per_task + 1) * local_slots

        grid = np.indices((buffer_cap + 1, packets_per_task + 1, local_slots)).reshape(3, -1)
        self.q, self.c_t, self.c_l = grid[0], grid[1], grid[2]
        self.states = [SysState(int(q), int(t), int(l)) for q, t, l in zip(self.q, self.c_t, self.c_l)]

    @classmethod
    def from_params(cls, params: SystemParams) -> "StateSpace":
        return cls(params.buffer_cap, params.packets_per_task, params.local_slots)

    def index(self, state) -> int:
        q, c_t, c_l = state
        if not (0 <= q <= self.buffer_cap and 0 <= c_t <= self.packets_per_task
                and 0 <= c_l < self.local_slots):
            raise IndexError(f"state {tuple(state)} is outside the state space")
        return (q * (self.packets_per_task + 1) + c_t) * self.local_slots + c_l

    def __len__(self):
        return self.size

    def __getitem__(self, i) -> SysState:
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    def queue_marginal(self, pi: np.ndarray) -> np.ndarray:
        """Pr{q = i} for i = 0..Q"""
        return np.bincount(self.q, weights=pi, minlength=self.buffer_cap + 1)


def enumerate_states(params: SystemParams) -> List[SysState]:
    return list(StateSpace.from_params(params).states)
