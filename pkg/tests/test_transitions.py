from collections import defaultdict

import numpy as np
import pytest

from chain.transitions import (Decision, decision_kernel, dump_matrix, feasibility_mask, feasible,
                               policy_kernel, step, wrap)
from conftest import make_params
from model.states import StateSpace
from policy.policies import Policy, make_baseline, sample_random_policy
from utils.exceptions import FeasibilityError


@pytest.mark.parametrize('state, k, arrival, channel_ok, expected', [
    ((2, 0, 0), 3, 0, 1, (0, 0, 1)),
    ((0, 0, 0), 4, 1, 0, (1, 0, 0)),
    ((1, 1, 5), 4, 0, 0, (1, 1, 6)),
    ((1, 1, 0), 1, 0, 1, (0, 0, 1)),
    ((1, 0, 0), 2, 0, 0, (0, 1, 0)),
    ((50, 0, 0), 4, 1, 1, (50, 0, 0)),
    ((3, 0, 16), 2, 1, 1, (3, 0, 0)),
])
def test_step_examples(baseline_params, state, k, arrival, channel_ok, expected):
    assert step(state, k, arrival, channel_ok, baseline_params) == expected


@pytest.mark.parametrize('state, k', [((0, 0, 0), 1), ((0, 0, 0), 2), ((1, 0, 0), 3),
                                      ((3, 1, 0), 2), ((3, 0, 4), 1), ((3, 1, 4), 3)])
def test_infeasible_step_raises(baseline_params, state, k):
    assert not feasible(state, k)
    with pytest.raises(FeasibilityError):
        step(state, k, 0, 0, baseline_params)


def test_decision_components():
    assert [(k.v_c, k.v_l) for k in Decision] == [(0, 1), (1, 0), (1, 1), (0, 0)]


def test_wrap():
    assert [wrap(x, 3) for x in range(4)] == [0, 1, 2, 0]


def test_feasibility_mask_matches_feasible(tiny_params):
    space = StateSpace.from_params(tiny_params)
    mask = feasibility_mask(space)
    for s, state in enumerate(space):
        assert [feasible(state, k) for k in range(1, 5)] == mask[s].tolist()
    assert mask[:, 3].all()
    assert mask.sum() == 30


def _named_row(kernel, state, k):
    space = kernel.space
    return {space[j]: p for j, p in kernel.row(space.index(state), k).items()}


def test_kernel_both_units_start():
    kernel = decision_kernel(make_params(alpha=0.6, beta=0.4))
    row = _named_row(kernel, (2, 0, 0), 3)
    assert row == pytest.approx({(1, 1, 1): 0.36, (1, 0, 1): 0.24, (0, 1, 1): 0.24, (0, 0, 1): 0.16})


def test_kernel_transmission_in_progress():
    kernel = decision_kernel(make_params(alpha=0.3, beta=0.4))
    row = _named_row(kernel, (0, 1, 0), 4)
    assert row == pytest.approx({(1, 0, 0): 0.12, (1, 1, 0): 0.18, (0, 0, 0): 0.28, (0, 1, 0): 0.42})


def test_kernel_rows_are_stochastic(small_params):
    kernel = decision_kernel(small_params)
    sums = np.asarray(kernel.matrix.sum(axis=1)).ravel()
    np.testing.assert_allclose(sums, 1.0, atol=1e-15)
    assert kernel.pair_count == int(kernel.mask.sum())


def test_kernel_has_no_row_for_infeasible_pair(tiny_params):
    kernel = decision_kernel(tiny_params)
    with pytest.raises(FeasibilityError):
        kernel.pair_index(kernel.space.index((1, 0, 0)), 3)


def test_policy_kernel_mixes_decision_rows():
    params = make_params(alpha=0.0, beta=0.4)
    kernel = decision_kernel(params)
    space = kernel.space
    table = Policy.idle(space).table.copy()
    table[space.index((1, 0, 0))] = (0.5, 0.5, 0.0, 0.0)
    chi = policy_kernel(kernel, Policy(space=space, table=table))

    r = chi.getrow(space.index((1, 0, 0)))
    row = {space[j]: p for j, p in zip(r.indices, r.data)}
    assert row == pytest.approx({(0, 0, 1): 0.5, (0, 1, 0): 0.3, (0, 0, 0): 0.2})


def _gamma(x, k):
    return 0 if x == k else x


def case_table_row(state, g, alpha, beta, M, N, Q):
    """Next-state law written out per idle/busy case of the two units"""
    i, m, n = state
    g1, g2, g3, g4 = g
    arrivals = {1: alpha, 0: 1.0 - alpha}
    out = defaultdict(float)

    def add(q, c_t, c_l, p):
        if p:
            out[(min(q, Q), c_t, c_l)] += p

    for a, pa in arrivals.items():
        if m == 0 and n == 0:
            if i >= 1:
                add(i - 1 + a, 0, _gamma(1, N), pa * g1)
                add(i - 1 + a, _gamma(2, M + 1), 0, pa * beta * g2)
                add(i - 1 + a, 1, 0, pa * (1 - beta) * g2)
            if i >= 2:
                add(i - 2 + a, _gamma(2, M + 1), _gamma(1, N), pa * beta * g3)
                add(i - 2 + a, 1, _gamma(1, N), pa * (1 - beta) * g3)
            add(i + a, 0, 0, pa * g4)
        elif m > 0 and n == 0:
            if i >= 1:
                add(i - 1 + a, _gamma(m + 1, M + 1), _gamma(1, N), pa * beta * g1)
                add(i - 1 + a, m, _gamma(1, N), pa * (1 - beta) * g1)
            add(i + a, _gamma(m + 1, M + 1), 0, pa * beta * g4)
            add(i + a, m, 0, pa * (1 - beta) * g4)
        elif m == 0 and n > 0:
            if i >= 1:
                add(i - 1 + a, _gamma(2, M + 1), _gamma(n + 1, N), pa * beta * g2)
                add(i - 1 + a, 1, _gamma(n + 1, N), pa * (1 - beta) * g2)
            add(i + a, 0, _gamma(n + 1, N), pa * g4)
        else:
            add(i + a, _gamma(m + 1, M + 1), _gamma(n + 1, N), pa * beta)
            add(i + a, m, _gamma(n + 1, N), pa * (1 - beta))
    return {key: p for key, p in out.items() if p > 0}


def test_policy_kernel_matches_case_tables():
    rng = np.random.default_rng(7)
    for _ in range(120):
        params = make_params(alpha=float(rng.uniform(0, 1)), beta=float(rng.uniform(0.05, 1)),
                             buffer_cap=int(rng.integers(1, 6)), packets_per_task=int(rng.integers(1, 4)),
                             local_slots=int(rng.integers(1, 6)))
        kernel = decision_kernel(params)
        space = kernel.space
        policy = sample_random_policy(space, rng)
        chi = policy_kernel(kernel, policy)

        s = int(rng.integers(len(space)))
        state = space[s]
        r = chi.getrow(s)
        got = {space[j]: p for j, p in zip(r.indices, r.data) if p > 0}
        expected = case_table_row(state, policy.table[s], params.alpha, params.beta,
                                  params.packets_per_task, params.local_slots, params.buffer_cap)
        assert got.keys() == expected.keys(), state
        for key in expected:
            assert got[key] == pytest.approx(expected[key], abs=1e-12)


def test_policy_kernel_is_stochastic_for_baselines(baseline_params):
    kernel = decision_kernel(baseline_params)
    for name in ('local', 'cloud', 'greedy'):
        chi = policy_kernel(kernel, make_baseline(name, baseline_params))
        np.testing.assert_allclose(np.asarray(chi.sum(axis=1)).ravel(), 1.0, atol=1e-12)


def test_dump_matrix(tmp_path, tiny_params):
    chi = policy_kernel(decision_kernel(tiny_params), make_baseline('greedy', tiny_params))
    path = tmp_path / 'chi.txt'
    dump_matrix(chi, path)
    lines = path.read_text().splitlines()
    assert len(lines) == chi.nnz
    entries = [line.split() for line in lines]
    keys = [(int(r), int(c)) for r, c, _ in entries]
    assert keys == sorted(keys)
    row, col, value = entries[0]
    assert float(value) == chi[int(row), int(col)]
