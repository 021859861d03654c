"""
Tests for configuration loading.
"""

import pytest

from src.config import load_config, setup_logging
from src.estimation.targeting import TargetingConfig
from src.exceptions import ConfigError


def test_defaults_loaded():
    """Packaged defaults contain every section."""
    cfg = load_config()
    for section in ('bounds', 'targeting', 'glm', 'inference', 'simulation', 'logging'):
        assert section in cfg
    assert cfg['bounds']['g_bounds'] == [0.01, 0.99]
    assert cfg['targeting']['max_iter'] == 100


def test_micro_step_default_matches_targeting_config():
    """The packaged micro-step equals the dataclass default of 1e-5."""
    cfg = load_config()
    assert cfg['targeting']['micro_step'] == 1e-5
    assert TargetingConfig.from_config(cfg).micro_step == TargetingConfig().micro_step == 1e-5


def test_user_file_overrides_nested_keys(tmp_path):
    """A user file replaces only the keys it names."""
    path = tmp_path / 'user.yaml'
    path.write_text("targeting:\n  max_iter: 7\n")

    cfg = load_config(path)

    assert cfg['targeting']['max_iter'] == 7
    assert cfg['targeting']['variant'] == 'standard'


def test_missing_user_file(tmp_path):
    """A named config file must exist."""
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'absent.yaml')


def test_non_mapping_file(tmp_path):
    """Top-level YAML must be a mapping."""
    path = tmp_path / 'list.yaml'
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_log_level():
    """Log levels are validated."""
    with pytest.raises(ConfigError):
        setup_logging({'logging': {'level': 'LOUD'}})
