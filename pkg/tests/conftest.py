from pathlib import Path

import pytest

from model.parameters import SystemParams

ROOT = Path(__file__).resolve().parents[1]


def make_params(**changes) -> SystemParams:
    """Reference slot-level parameters: N=17, N_cloud=1, M=1, beta=0.4, Q=50"""
    values = dict(
        alpha=0.2,
        beta=0.4,
        slot_len=0.02,
        buffer_cap=50,
        packets_per_task=1,
        local_slots=17,
        cloud_slots=1,
        feedback_slots=0.0,
        p_loc=0.8,
        p_tx=1.0,
        p_max=1.2,
    )
    values.update(changes)
    return SystemParams(**values)


@pytest.fixture
def baseline_params():
    return make_params()


@pytest.fixture
def tiny_params():
    """Q=3, M=1, N=2 with a power budget that never binds"""
    return make_params(alpha=0.3, beta=0.5, buffer_cap=3, local_slots=2, p_max=10.0)


@pytest.fixture
def small_params():
    return make_params(alpha=0.15, buffer_cap=12, local_slots=4)


@pytest.fixture
def baseline_config():
    return ROOT / 'config' / 'baseline.env'


@pytest.fixture
def write_config(tmp_path):
    def _write(text, name='scenario.env'):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return _write
