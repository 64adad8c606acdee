import math
import logging
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from utils.exceptions import DivergentTransmissionError, InvalidParameterError


@dataclass(frozen=True)
class SystemParams:
    """Slot-level inputs of the device/server model. Times are in slots, powers in watts."""
    alpha: float
    beta: float
    slot_len: float
    buffer_cap: int
    packets_per_task: int
    local_slots: int
    cloud_slots: int
    feedback_slots: float
    p_loc: float
    p_tx: float
    p_max: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beta == 0.0:
            raise DivergentTransmissionError("beta = 0: the channel is always in outage")
        if not 0.0 < self.beta <= 1.0:
            raise InvalidParameterError(f"beta must lie in (0, 1], got {self.beta}")
        if self.slot_len <= 0:
            raise InvalidParameterError(f"slot_len must be positive, got {self.slot_len}")
        for name in ('buffer_cap', 'packets_per_task', 'local_slots', 'cloud_slots'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {value}")
        if self.feedback_slots < 0:
            raise InvalidParameterError(f"feedback_slots must be non-negative, got {self.feedback_slots}")
        for name in ('p_loc', 'p_tx', 'p_max'):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def t_tx(self) -> float:
        return transmission_time(self)

    @property
    def t_c(self) -> float:
        return cloud_time(self)

    @property
    def service_capacity(self) -> float:
        """Long-run task completions per slot with both units always busy"""
        return 1.0 / self.local_slots + self.beta / self.packets_per_task

    @property
    def max_power(self) -> float:
        """Largest attainable average power, P_loc + beta * P_tx"""
        return self.p_loc + self.beta * self.p_tx

    def with_overrides(self, **changes) -> "SystemParams":
        changes = {key: value for key, value in changes.items() if value is not None}
        return replace(self, **changes) if changes else self

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class PhysicalInputs:
    """Raw physical quantities the slot-level constants are derived from."""
    data_bits: float
    cycles_per_task: float
    f_loc: float
    f_ser: float
    bandwidth: float
    noise_power: float
    tx_power: float
    mean_gain: float
    kappa: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0 or not math.isfinite(value):
                raise InvalidParameterError(f"{f.name} must be strictly positive, got {value}")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def _slots_needed(cycles: float, frequency: float, slot_len: float) -> int:
    ratio = cycles / (frequency * slot_len)
    # guard against 3.0000000000000004-style ratios rounding up a whole slot
    return max(1, math.ceil(ratio * (1.0 - 1e-12)))


def rate_threshold(phys: PhysicalInputs, slot_len: float, packets_per_task: int) -> float:
    """Per-packet rate R = L / (M * slot_len) in bits/s"""
    return phys.data_bits / (packets_per_task * slot_len)


def outage_threshold(phys: PhysicalInputs, rate: float) -> float:
    """Smallest channel gain that supports `rate` at the configured transmit power"""
    return (2.0 ** (rate / phys.bandwidth) - 1.0) * phys.noise_power / phys.tx_power


def outage_success_prob(phys: PhysicalInputs, rate: float) -> float:
    """Probability that a slot is not in outage, assuming Rayleigh fading (exponential gain)"""
    gamma_th = outage_threshold(phys, rate)
    beta = float(np.exp(-gamma_th / phys.mean_gain))
    return min(1.0, max(beta, np.finfo(float).tiny))


def derive_constants(phys: PhysicalInputs, slot_len: float, alpha: float, buffer_cap: int,
                     packets_per_task: int, feedback_slots: float = 0.0,
                     p_max: Optional[float] = None, beta: Optional[float] = None) -> SystemParams:
    """Turn physical inputs plus slot/queue settings into SystemParams"""
    if slot_len <= 0:
        raise InvalidParameterError(f"slot_len must be positive, got {slot_len}")
    if packets_per_task < 1:
        raise InvalidParameterError(f"packets_per_task must be a positive integer, got {packets_per_task}")

    local_slots = _slots_needed(phys.cycles_per_task, phys.f_loc, slot_len)
    cloud_slots = _slots_needed(phys.cycles_per_task, phys.f_ser, slot_len)
    p_loc = phys.kappa * phys.f_loc ** 3

    if beta is None:
        beta = outage_success_prob(phys, rate_threshold(phys, slot_len, packets_per_task))
        logging.info(f"beta derived from Rayleigh outage model: {beta:.6g}")
    if p_max is None:
        p_max = p_loc + beta * phys.tx_power

    return SystemParams(
        alpha=alpha,
        beta=beta,
        slot_len=slot_len,
        buffer_cap=int(buffer_cap),
        packets_per_task=int(packets_per_task),
        local_slots=local_slots,
        cloud_slots=cloud_slots,
        feedback_slots=feedback_slots,
        p_loc=p_loc,
        p_tx=phys.tx_power,
        p_max=p_max,
    )


def transmission_time(params: SystemParams) -> float:
    """Mean slots to deliver all M packets: M * sum_j j(1-beta)^(j-1) beta = M / beta"""
    if params.beta <= 0:
        raise DivergentTransmissionError("beta = 0: transmission time diverges")
    return params.packets_per_task / params.beta


def cloud_time(params: SystemParams) -> float:
    """Mean offloaded processing time t_tx + N_cloud + t_rx, in slots"""
    return transmission_time(params) + params.cloud_slots + params.feedback_slots
