"""Slot-by-slot Monte Carlo execution of a scheduling policy.

Every slot: observe the state, draw a decision from the policy row, draw the
channel, advance the device with `chain.step`, then admit (or drop) the arrival.
Arrivals, channel and decisions use three independent streams spawned from one
seed, so changing the policy leaves the arrival and channel paths untouched.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy import stats

from chain.transitions import Decision, feasibility_mask, step
from model.parameters import SystemParams
from model.states import StateSpace, SysState
from policy.policies import Policy
from utils.exceptions import InvalidArgumentError

BATCHES = 20
CONFIDENCE = 0.95
TRACE_COLUMNS = ['arrival_slot', 'start_slot', 'completion_slot', 'venue', 'delay_slots']


@dataclass(frozen=True)
class SimConfig:
    slots: int
    warmup: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if int(self.slots) != self.slots or self.slots < 1:
            raise InvalidArgumentError(f"slots must be a positive integer, got {self.slots}")
        warmup = self.slots // 10 if self.warmup is None else self.warmup
        if not 0 <= warmup < self.slots:
            raise InvalidArgumentError(f"warmup must lie in [0, slots), got {warmup} for {self.slots} slots")
        object.__setattr__(self, 'slots', int(self.slots))
        object.__setattr__(self, 'warmup', int(warmup))


@dataclass
class TaskRecord:
    arrival_slot: int
    start_slot: Optional[int] = None
    completion_slot: Optional[float] = None
    venue: Optional[str] = None

    @property
    def delay(self) -> Optional[float]:
        if self.completion_slot is None:
            return None
        return self.completion_slot - self.arrival_slot


@dataclass
class SimReport:
    policy_name: str
    alpha: float
    slots: int
    warmup: int
    seed: int
    tasks_arrived: int
    tasks_completed: int
    incomplete_tasks: int
    dropped_tasks: int
    mean_delay: float
    delay_half_width: float
    mean_wait: float
    mean_queue_len: float
    local_fraction: float
    mean_power: float
    power_half_width: float
    occupancy: np.ndarray = field(repr=False)
    tasks: List[TaskRecord] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        """Scalar fields in a fixed order"""
        return {
            'policy_name': self.policy_name,
            'alpha': self.alpha,
            'slots': self.slots,
            'warmup': self.warmup,
            'seed': self.seed,
            'tasks_arrived': self.tasks_arrived,
            'tasks_completed': self.tasks_completed,
            'incomplete_tasks': self.incomplete_tasks,
            'dropped_tasks': self.dropped_tasks,
            'mean_delay': self.mean_delay,
            'delay_half_width': self.delay_half_width,
            'mean_wait': self.mean_wait,
            'mean_queue_len': self.mean_queue_len,
            'local_fraction': self.local_fraction,
            'mean_power': self.mean_power,
            'power_half_width': self.power_half_width,
        }

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(r.arrival_slot, r.start_slot, r.completion_slot, r.venue, r.delay) for r in self.tasks],
            columns=TRACE_COLUMNS)

    def occupancy_tv(self, pi: np.ndarray) -> float:
        """Total-variation distance between the empirical occupancy and a distribution over states"""
        return 0.5 * float(np.abs(self.occupancy - np.asarray(pi)).sum())


def _half_width(batch_means: np.ndarray) -> float:
    batch_means = batch_means[np.isfinite(batch_means)]
    if batch_means.size < 2:
        return float('nan')
    quantile = stats.t.ppf(0.5 + CONFIDENCE / 2.0, batch_means.size - 1)
    return float(quantile * batch_means.std(ddof=1) / np.sqrt(batch_means.size))


class SlotSimulator:
    def __init__(self, batches: int = BATCHES):
        self.batches = batches

    def run(self, policy: Policy, params: SystemParams, cfg: SimConfig) -> SimReport:
        space = StateSpace.from_params(params)
        if policy.table.shape != (space.size, 4):
            raise InvalidArgumentError(
                f"policy '{policy.name}' covers {policy.table.shape[0]} states, the system has {space.size}")

        arrival_rng, channel_rng, decision_rng = (
            np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3))
        arrivals = arrival_rng.random(cfg.slots) < params.alpha
        channel = channel_rng.random(cfg.slots) < params.beta
        draws = decision_rng.random(cfg.slots)
        cumulative = np.cumsum(policy.table * feasibility_mask(space), axis=1)

        cloud_delay = params.cloud_slots + params.feedback_slots
        queue = deque()
        tasks: List[TaskRecord] = []
        in_flight = None
        state = SysState(0, 0, 0)
        occupancy = np.zeros(space.size)
        power = np.zeros(cfg.slots)
        dropped = 0

        logging.info(f"Simulating '{policy.name}' for {cfg.slots} slots (warmup {cfg.warmup}, seed {cfg.seed})")
        for t in range(cfg.slots):
            s = space.index(state)
            if t >= cfg.warmup:
                occupancy[s] += 1
            decision = Decision(self._decide(cumulative[s], draws[t]))

            if decision.v_l:
                task = queue.popleft()
                task.start_slot, task.venue = t, 'local'
                task.completion_slot = t + params.local_slots
            if decision.v_c:
                in_flight = queue.popleft()
                in_flight.start_slot, in_flight.venue = t, 'cloud'

            cpu_active = state.c_l > 0 or decision.v_l
            sending = state.c_t > 0 or decision.v_c
            delivered = sending and bool(channel[t])
            power[t] = params.p_loc * cpu_active + params.p_tx * delivered

            next_state = step(state, decision, int(arrivals[t]), int(channel[t]), params)
            if delivered and next_state.c_t == 0:
                # last packet went out in slot t; the server result comes back later
                in_flight.completion_slot = t + 1 + cloud_delay
                in_flight = None

            if arrivals[t]:
                if len(queue) >= params.buffer_cap:
                    dropped += t >= cfg.warmup
                else:
                    task = TaskRecord(arrival_slot=t)
                    queue.append(task)
                    tasks.append(task)
            state = next_state

        return self._report(policy, params, cfg, space, tasks, occupancy, power, dropped)

    @staticmethod
    def _decide(cumulative_row: np.ndarray, u: float) -> int:
        total = cumulative_row[-1]
        if total <= 0:
            return int(Decision.IDLE)
        index = int(np.searchsorted(cumulative_row, u * total, side='right'))
        return min(index, 3) + 1

    def _report(self, policy, params, cfg, space, tasks, occupancy, power, dropped) -> SimReport:
        measured = cfg.slots - cfg.warmup
        occupancy = occupancy / measured
        tracked = [r for r in tasks if r.arrival_slot >= cfg.warmup]
        done = [r for r in tracked if r.completion_slot is not None and r.completion_slot <= cfg.slots]
        started = [r for r in tracked if r.start_slot is not None]

        delays = np.array([r.delay for r in done], dtype=float)
        mean_delay = float(delays.mean()) if delays.size else float('nan')
        waits = np.array([r.start_slot - r.arrival_slot for r in started], dtype=float)
        local = np.array([r.venue == 'local' for r in started])

        batch_power = np.array([chunk.mean() for chunk in np.array_split(power[cfg.warmup:], self.batches)
                                if chunk.size])
        if delays.size:
            batch_of = (np.array([r.arrival_slot for r in done]) - cfg.warmup) * self.batches // measured
            sums = np.bincount(batch_of, weights=delays, minlength=self.batches)
            counts = np.bincount(batch_of, minlength=self.batches)
            with np.errstate(invalid='ignore', divide='ignore'):
                batch_delay = sums / counts
            delay_half_width = _half_width(batch_delay)
        else:
            delay_half_width = float('nan')

        report = SimReport(
            policy_name=policy.name,
            alpha=params.alpha,
            slots=cfg.slots,
            warmup=cfg.warmup,
            seed=cfg.seed,
            tasks_arrived=len(tracked),
            tasks_completed=len(done),
            incomplete_tasks=len(tracked) - len(done),
            dropped_tasks=int(dropped),
            mean_delay=mean_delay,
            delay_half_width=delay_half_width,
            mean_wait=float(waits.mean()) if waits.size else float('nan'),
            mean_queue_len=float(occupancy @ space.q),
            local_fraction=float(local.mean()) if local.size else float('nan'),
            mean_power=float(power[cfg.warmup:].mean()),
            power_half_width=_half_width(batch_power),
            occupancy=occupancy,
            tasks=tasks,
        )
        if dropped:
            logging.warning(f"Simulation of '{policy.name}' dropped {dropped} tasks on a full buffer")
        logging.info(f"Simulated mean delay {mean_delay:.6g} slots over {len(done)} tasks")
        return report


slot_simulator = SlotSimulator()


def run(policy: Policy, params: SystemParams, cfg: SimConfig) -> SimReport:
    return slot_simulator.run(policy, params, cfg)
