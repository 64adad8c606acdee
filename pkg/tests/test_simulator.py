import math

import numpy as np
import pytest

from analytics.metrics import evaluate
from conftest import make_params
from model.states import StateSpace
from optimization.synthesis import search_optimal
from policy.policies import Policy, make_baseline
from processing.validity import validity_checker
from simulation.simulator import TRACE_COLUMNS, SimConfig, run
from utils.exceptions import InvalidArgumentError


def test_no_arrivals_no_tasks_no_power():
    params = make_params(alpha=0.0, buffer_cap=5)
    report = run(make_baseline('greedy', params), params, SimConfig(slots=10_000))
    assert report.tasks_arrived == 0
    assert report.tasks_completed == 0
    assert report.mean_power == 0.0
    assert math.isnan(report.mean_delay)
    assert report.occupancy[0] == 1.0


def test_same_seed_same_report(small_params):
    policy = make_baseline('greedy', small_params)
    first = run(policy, small_params, SimConfig(slots=20_000, seed=4))
    second = run(policy, small_params, SimConfig(slots=20_000, seed=4))
    assert first.summary() == second.summary()
    np.testing.assert_array_equal(first.occupancy, second.occupancy)


def test_seed_changes_the_sample_path(small_params):
    policy = make_baseline('greedy', small_params)
    first = run(policy, small_params, SimConfig(slots=20_000, seed=1))
    second = run(policy, small_params, SimConfig(slots=20_000, seed=2))
    assert first.summary() != second.summary()


def test_arrivals_do_not_depend_on_the_policy(small_params):
    cfg = SimConfig(slots=5_000, seed=3)
    local = run(make_baseline('local', small_params), small_params, cfg)
    cloud = run(make_baseline('cloud', small_params), small_params, cfg)
    assert [r.arrival_slot for r in local.tasks] == [r.arrival_slot for r in cloud.tasks]


def test_one_slot_cpu_every_task_takes_two_slots():
    params = make_params(alpha=1 / 3, local_slots=1, buffer_cap=10)
    report = run(make_baseline('local', params), params, SimConfig(slots=100_000, seed=0))
    assert report.dropped_tasks == 0
    assert report.mean_delay == 2.0
    assert report.mean_wait == 1.0
    assert report.local_fraction == 1.0
    assert report.mean_queue_len == pytest.approx(1 / 3, abs=0.01)
    delays = report.trace_frame()['delay_slots'].dropna()
    assert (delays == 2).all()


def test_cloud_processing_includes_server_slots(small_params):
    report = run(make_baseline('cloud', small_params), small_params, SimConfig(slots=20_000, seed=5))
    frame = report.trace_frame().dropna()
    processing = frame['completion_slot'] - frame['start_slot']
    assert (frame['venue'] == 'cloud').all()
    assert processing.min() >= 1 + small_params.cloud_slots
    assert report.local_fraction == 0.0


def test_queue_length_and_wait_obey_littles_law(small_params):
    report = run(make_baseline('greedy', small_params), small_params, SimConfig(slots=200_000, seed=6))
    assert report.mean_queue_len / small_params.alpha == pytest.approx(report.mean_wait, rel=0.02)


def test_simulated_power_close_to_analysis(small_params):
    policy = make_baseline('greedy', small_params)
    report = run(policy, small_params, SimConfig(slots=200_000, seed=8))
    expected = evaluate(policy, small_params).p_bar
    assert report.mean_power == pytest.approx(expected, rel=0.03)
    assert report.power_half_width > 0.0


@pytest.mark.parametrize('seed', range(5))
def test_stable_load_never_fills_the_buffer(baseline_params, seed):
    report = run(make_baseline('cloud', baseline_params), baseline_params, SimConfig(slots=50_000, seed=seed))
    assert report.dropped_tasks == 0
    assert report.tasks_completed > 0


def test_full_buffer_drops_arrivals():
    params = make_params(alpha=0.5, buffer_cap=1)
    report = run(make_baseline('local', params), params, SimConfig(slots=5_000, seed=0))
    assert report.dropped_tasks > 0


def test_trace_frame(small_params):
    report = run(make_baseline('greedy', small_params), small_params, SimConfig(slots=2_000, seed=0))
    frame = report.trace_frame()
    assert list(frame.columns) == TRACE_COLUMNS
    assert len(frame) == len(report.tasks)
    assert set(frame['venue'].dropna()) <= {'local', 'cloud'}


def test_occupancy_is_a_distribution(small_params):
    report = run(make_baseline('greedy', small_params), small_params, SimConfig(slots=10_000, seed=0))
    assert report.occupancy.sum() == pytest.approx(1.0)
    assert report.occupancy.size == len(StateSpace.from_params(small_params))


@pytest.mark.parametrize('kwargs', [{'slots': 0}, {'slots': 10, 'warmup': 10}, {'slots': 10, 'warmup': -1}])
def test_invalid_config(kwargs):
    with pytest.raises(InvalidArgumentError):
        SimConfig(**kwargs)


def test_default_warmup_is_a_tenth():
    assert SimConfig(slots=1_000).warmup == 100


def test_policy_for_another_system(small_params, tiny_params):
    policy = Policy.idle(StateSpace.from_params(tiny_params))
    with pytest.raises(InvalidArgumentError):
        run(policy, small_params, SimConfig(slots=100))


@pytest.mark.slow
def test_cloud_delay_matches_analysis(baseline_params):
    policy = make_baseline('cloud', baseline_params)
    report = run(policy, baseline_params, SimConfig(slots=1_000_000, seed=1))
    assert report.mean_delay == pytest.approx(evaluate(policy, baseline_params).t_bar, rel=0.02)
    assert report.delay_half_width < 0.05 * report.mean_delay


@pytest.mark.slow
def test_occupancy_close_to_steady_state(small_params):
    policy = make_baseline('greedy', small_params)
    report = run(policy, small_params, SimConfig(slots=1_000_000, seed=2))
    assert report.occupancy_tv(evaluate(policy, small_params).steady.pi) < 0.01


def _policy(name, params):
    if name == 'optimal':
        return search_optimal(params, grid_size=20).policy
    return make_baseline(name, params)


@pytest.mark.slow
@pytest.mark.parametrize('alpha', [0.05, 0.2, 0.35])
@pytest.mark.parametrize('name', ['local', 'cloud', 'greedy', 'optimal'])
def test_simulation_agrees_with_analysis(name, alpha):
    params = make_params(alpha=alpha)
    policy = _policy(name, params)
    metrics = evaluate(policy, params)
    checks = validity_checker.check_validity(metrics, params)
    if 'failed' in (checks['overflow']['status'], checks['stability']['status']):
        pytest.skip(f"{name} is unstable at alpha={alpha}")

    report = run(policy, params, SimConfig(slots=1_000_000, seed=7))
    assert abs(report.mean_delay - metrics.t_bar) <= 0.02 * metrics.t_bar + report.delay_half_width
    assert abs(report.mean_power - metrics.p_bar) <= 0.02 * metrics.p_bar + report.power_half_width
    assert report.local_fraction == pytest.approx(metrics.eta, rel=0.02, abs=0.005)
