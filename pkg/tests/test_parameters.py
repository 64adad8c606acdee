import math

import pytest

from conftest import make_params
from model.parameters import (PhysicalInputs, cloud_time, derive_constants, outage_success_prob,
                              outage_threshold, rate_threshold, transmission_time)
from model.states import StateSpace, enumerate_states
from utils.exceptions import DivergentTransmissionError, InvalidParameterError


def reference_inputs(**changes):
    values = dict(data_bits=5e5, cycles_per_task=6.5e8, f_loc=2e9, f_ser=1e11, bandwidth=5e6,
                  noise_power=1e-9, tx_power=1.0, mean_gain=1.6e-7, kappa=1e-28)
    values.update(changes)
    return PhysicalInputs(**values)


def test_derive_reference_constants():
    params = derive_constants(reference_inputs(), slot_len=0.02, alpha=0.2, buffer_cap=50,
                              packets_per_task=1, beta=0.4)
    assert params.local_slots == 17
    assert params.cloud_slots == 1
    assert params.p_loc == pytest.approx(0.8, rel=1e-12)
    assert params.t_tx == pytest.approx(2.5)
    assert params.t_c == pytest.approx(3.5)
    assert params.p_max == pytest.approx(1.2)


def test_doubling_cpu_frequency_gives_nine_slots():
    params = derive_constants(reference_inputs(f_loc=4e9), slot_len=0.02, alpha=0.2, buffer_cap=50,
                              packets_per_task=1, beta=0.4)
    assert params.local_slots == 9


def test_exact_one_slot_of_cycles():
    phys = reference_inputs(cycles_per_task=2e9 * 0.02)
    params = derive_constants(phys, slot_len=0.02, alpha=0.1, buffer_cap=5, packets_per_task=1, beta=0.5)
    assert params.local_slots == 1


def test_more_cycles_never_fewer_slots():
    slots = [derive_constants(reference_inputs(cycles_per_task=c), 0.02, 0.1, 5, 1, beta=0.4).local_slots
             for c in (1e8, 3e8, 6.5e8, 9e8, 2e9)]
    assert slots == sorted(slots)


def test_outage_threshold_for_five_bits_per_hertz():
    phys = reference_inputs()
    rate = rate_threshold(phys, 0.02, 1)
    assert rate / phys.bandwidth == pytest.approx(5.0)
    assert outage_threshold(phys, rate) == pytest.approx(3.1e-8)
    assert outage_success_prob(phys, rate) == pytest.approx(math.exp(-3.1e-8 / 1.6e-7))


def test_outage_probability_at_mean_gain_threshold():
    phys = reference_inputs()
    rate = rate_threshold(phys, 0.02, 1)
    at_mean = reference_inputs(mean_gain=outage_threshold(phys, rate))
    assert outage_success_prob(at_mean, rate) == pytest.approx(math.exp(-1.0))
    assert outage_success_prob(phys, 0.0) == 1.0


def test_beta_derived_when_not_given():
    params = derive_constants(reference_inputs(), 0.02, 0.2, 50, 1)
    assert params.beta == pytest.approx(math.exp(-0.19375))


@pytest.mark.parametrize('packets, beta, expected', [(1, 0.4, 2.5), (3, 1.0, 3.0), (2, 0.5, 4.0)])
def test_transmission_time(packets, beta, expected):
    params = make_params(packets_per_task=packets, beta=beta)
    assert transmission_time(params) == pytest.approx(expected)
    assert transmission_time(params) * beta == pytest.approx(packets)


def test_cloud_time_adds_server_and_feedback():
    assert cloud_time(make_params(feedback_slots=0.5)) == pytest.approx(4.0)


def test_zero_beta_diverges():
    with pytest.raises(DivergentTransmissionError):
        make_params(beta=0.0)


@pytest.mark.parametrize('changes', [{'alpha': 1.5}, {'alpha': -0.1}, {'buffer_cap': 0},
                                     {'local_slots': 2.5}, {'p_max': -1.0}, {'slot_len': 0.0}])
def test_invalid_parameters(changes):
    with pytest.raises(InvalidParameterError):
        make_params(**changes)


def test_non_positive_physical_input():
    with pytest.raises(InvalidParameterError):
        reference_inputs(f_loc=0.0)


def test_service_capacity_and_max_power():
    params = make_params()
    assert params.service_capacity == pytest.approx(1 / 17 + 0.4)
    assert params.max_power == pytest.approx(1.2)


def test_with_overrides_skips_none():
    params = make_params()
    assert params.with_overrides(alpha=None) is params
    assert params.with_overrides(alpha=0.3, buffer_cap=None).alpha == 0.3


def test_enumerate_small_space_in_lexicographic_order():
    states = enumerate_states(make_params(buffer_cap=1, local_slots=1))
    assert [tuple(s) for s in states] == [(0, 0, 0), (0, 1, 0), (1, 0, 0), (1, 1, 0)]


@pytest.mark.parametrize('q, m, n, size', [(50, 1, 17, 1734), (3, 1, 2, 16)])
def test_state_space_size_and_index(q, m, n, size):
    space = StateSpace(q, m, n)
    assert len(space) == size
    assert len(set(space.states)) == size
    assert all(space.index(state) == i for i, state in enumerate(space))


def test_index_rejects_outside_states():
    space = StateSpace(3, 1, 2)
    with pytest.raises(IndexError):
        space.index((4, 0, 0))
    with pytest.raises(IndexError):
        space.index((0, 0, 2))
