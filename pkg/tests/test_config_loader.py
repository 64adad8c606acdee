import math

import pytest

from model.config_loader import config_loader
from utils.exceptions import ConfigError

DIRECT = """alpha=0.3
beta=0.5
local_slots=2
cloud_slots=1
p_loc=0.8
p_tx=1
buffer_cap=3
"""


def test_baseline_config_derives_reference_constants(baseline_config):
    params = config_loader.load(baseline_config)
    assert params.alpha == 0.2
    assert params.local_slots == 17
    assert params.cloud_slots == 1
    assert params.beta == 0.4
    assert params.p_loc == pytest.approx(0.8)
    assert params.t_c == pytest.approx(3.5)
    assert params.buffer_cap == 50


def test_overrides_replace_file_values(baseline_config):
    params = config_loader.load(baseline_config, alpha=0.35, p_max=0.9, buffer_cap=20)
    assert (params.alpha, params.p_max, params.buffer_cap) == (0.35, 0.9, 20)


def test_none_override_keeps_file_value(baseline_config):
    assert config_loader.load(baseline_config, alpha=None).alpha == 0.2


def test_direct_constants_with_defaults(write_config):
    params = config_loader.load(write_config(DIRECT))
    assert params.local_slots == 2
    assert params.packets_per_task == 1
    assert params.feedback_slots == 0.0
    assert params.slot_len == 0.02
    assert params.p_max == pytest.approx(0.8 + 0.5 * 1.0)


def test_missing_alpha_names_the_key(write_config):
    path = write_config(DIRECT.replace('alpha=0.3\n', ''))
    with pytest.raises(ConfigError) as info:
        config_loader.load(path)
    assert info.value.key == 'alpha'


def test_missing_direct_key(write_config):
    path = write_config(DIRECT.replace('p_tx=1\n', ''))
    with pytest.raises(ConfigError) as info:
        config_loader.load(path)
    assert info.value.key == 'p_tx'


def test_unknown_key_reports_line(write_config):
    path = write_config(DIRECT + '# comment\nspeed_of_light=3e8\n')
    with pytest.raises(ConfigError) as info:
        config_loader.load(path)
    assert info.value.key == 'speed_of_light'
    assert info.value.line == 9


def test_non_numeric_value(write_config):
    path = write_config(DIRECT.replace('beta=0.5', 'beta=high'))
    with pytest.raises(ConfigError) as info:
        config_loader.load(path)
    assert info.value.key == 'beta'
    assert info.value.line == 2


def test_fractional_integer_key(write_config):
    with pytest.raises(ConfigError):
        config_loader.load(write_config(DIRECT.replace('buffer_cap=3', 'buffer_cap=3.5')))


def test_invalid_value_becomes_config_error(write_config):
    with pytest.raises(ConfigError):
        config_loader.load(write_config(DIRECT.replace('alpha=0.3', 'alpha=1.7')))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        config_loader.load(tmp_path / 'nowhere.env')


def test_beta_from_fading_model_when_absent(baseline_config, write_config):
    text = baseline_config.read_text(encoding='utf-8').replace('beta=0.4', '')
    params = config_loader.load(write_config(text))
    assert params.beta == pytest.approx(math.exp(-0.19375))
