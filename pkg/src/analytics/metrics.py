"""Closed-form delay and power metrics of a scheduling policy from its steady state."""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from chain.steady_state import SteadyState, steady_state
from chain.transitions import decision_kernel, policy_kernel
from model.parameters import SystemParams
from model.states import StateSpace
from policy.policies import Policy
from utils.exceptions import NoThroughputError, UndefinedDelayError

OVERFLOW_LIMIT = 1e-3


@dataclass(frozen=True)
class PowerSummary:
    nu_loc: float
    nu_tx: float            # beta folded in: mean successful-transmission probability
    nu_tx_attempt: float    # beta factored out, nu_tx / beta
    p_bar: float


@dataclass(frozen=True)
class Metrics:
    policy_name: str
    alpha: float
    beta: float
    t_q: float
    eta: float
    t_p: float
    t_bar: float
    nu_loc: float
    nu_tx: float
    p_bar: float
    overflow_mass: float
    steady: SteadyState
    slot_len: float

    @property
    def valid(self) -> bool:
        return self.overflow_mass < OVERFLOW_LIMIT

    def in_ms(self, slots: float) -> float:
        return slots * self.slot_len * 1e3


def _pi(pi) -> np.ndarray:
    return pi.pi if isinstance(pi, SteadyState) else np.asarray(pi, dtype=float)


def _table(policy) -> np.ndarray:
    return policy.table if isinstance(policy, Policy) else np.asarray(policy, dtype=float)


def queue_delay(pi, alpha: float, space: StateSpace) -> float:
    """Mean buffer waiting time by Little's law, E[q] / alpha"""
    if alpha <= 0:
        raise UndefinedDelayError("queueing delay is undefined when no tasks arrive (alpha = 0)")
    return float(np.dot(space.q, _pi(pi))) / alpha


def _scheduling_sets(space: StateSpace):
    s1 = (space.q >= 1) & (space.c_l == 0)
    s2 = (space.q >= 1) & (space.c_t == 0)
    s3 = (space.q >= 2) & (space.c_l == 0) & (space.c_t == 0)
    return s1, s2, s3


def local_fraction(pi, policy, space: StateSpace = None) -> float:
    """Long-run share of tasks started on the local CPU"""
    pi = _pi(pi)
    table = _table(policy)
    s1, s2, s3 = _scheduling_sets(space or policy.space)
    local = np.dot(pi[s1], table[s1, 0]) + np.dot(pi[s3], table[s3, 2])
    cloud = np.dot(pi[s2], table[s2, 1]) + np.dot(pi[s3], table[s3, 2])
    total = local + cloud
    if total <= 0:
        raise NoThroughputError("no task is ever scheduled, local fraction is undefined")
    return float(local / total)


def processing_time(eta: float, params: SystemParams) -> float:
    return eta * params.local_slots + (1.0 - eta) * params.t_c


def total_delay(t_q: float, t_p: float) -> float:
    return t_q + t_p


def _coefficients(q, c_t, c_l, g, beta):
    g1, g2, g3 = g[..., 0], g[..., 1], g[..., 2]
    both_idle_many = (q >= 2) & (c_t == 0) & (c_l == 0)

    mu_loc = np.where(c_l > 0, 1.0,
                      np.where(both_idle_many, g1 + g3,
                               np.where((q >= 1) & (c_l == 0), g1, 0.0)))
    mu_tx = np.where(c_t > 0, beta,
                     np.where(both_idle_many, beta * (g2 + g3),
                              np.where((q >= 1) & (c_t == 0), beta * g2, 0.0)))
    return mu_loc, mu_tx


def power_coefficients(state, policy: Union[Policy, Sequence[float]],
                       params: SystemParams) -> Tuple[float, float]:
    """(mu_loc, mu_tx) of one state: probabilities of CPU activity and of a successful packet"""
    q, c_t, c_l = state
    g = policy.row(state) if isinstance(policy, Policy) else np.asarray(policy, dtype=float)
    mu_loc, mu_tx = _coefficients(np.asarray(q), np.asarray(c_t), np.asarray(c_l), g, params.beta)
    return float(mu_loc), float(mu_tx)


def average_power(pi, policy, params: SystemParams, space: StateSpace = None) -> PowerSummary:
    space = space or StateSpace.from_params(params)
    pi = _pi(pi)
    mu_loc, mu_tx = _coefficients(space.q, space.c_t, space.c_l, _table(policy), params.beta)
    nu_loc = float(np.dot(pi, mu_loc))
    nu_tx = float(np.dot(pi, mu_tx))
    return PowerSummary(
        nu_loc=nu_loc,
        nu_tx=nu_tx,
        nu_tx_attempt=nu_tx / params.beta,
        p_bar=nu_loc * params.p_loc + nu_tx * params.p_tx,
    )


def overflow_mass(pi, space: StateSpace) -> float:
    return float(_pi(pi)[space.q == space.buffer_cap].sum())


def evaluate(policy: Policy, params: SystemParams) -> Metrics:
    """Kernel, steady state and every metric of `policy` under `params`"""
    if params.alpha <= 0:
        raise UndefinedDelayError("cannot evaluate a policy when no tasks arrive (alpha = 0)")

    kernel = decision_kernel(params)
    space = kernel.space
    steady = steady_state(policy_kernel(kernel, policy))

    t_q = queue_delay(steady, params.alpha, space)
    eta = local_fraction(steady, policy, space)
    t_p = processing_time(eta, params)
    power = average_power(steady, policy, params, space)
    overflow = overflow_mass(steady, space)

    if overflow >= OVERFLOW_LIMIT:
        logging.warning(f"Policy '{policy.name}' at alpha={params.alpha:g}: overflow mass "
                        f"{overflow:.3e}, results marked invalid")

    return Metrics(
        policy_name=policy.name,
        alpha=params.alpha,
        beta=params.beta,
        t_q=t_q,
        eta=eta,
        t_p=t_p,
        t_bar=total_delay(t_q, t_p),
        nu_loc=power.nu_loc,
        nu_tx=power.nu_tx,
        p_bar=power.p_bar,
        overflow_mass=overflow,
        steady=steady,
        slot_len=params.slot_len,
    )
