"""
Configuration loading and logging setup.
"""

import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .exceptions import ConfigError

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent / 'config' / 'default.yaml'


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, 'r') as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Malformed configuration file {path}: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration file {path} must hold a mapping")
    return data


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Load the packaged defaults, overlaid with a user configuration file.

    Args:
        path: Optional YAML file whose keys override the defaults

    Returns:
        Nested configuration dictionary
    """
    cfg = _read_yaml(DEFAULT_CONFIG_PATH) if DEFAULT_CONFIG_PATH.exists() else {}

    if path is not None:
        user_path = Path(path)
        if not user_path.exists():
            raise ConfigError(f"Configuration file not found: {user_path}")
        cfg = _deep_merge(cfg, _read_yaml(user_path))

    return cfg


def setup_logging(cfg: Dict[str, Any]):
    """
    Configure the root logger from the ``logging`` config section.

    Args:
        cfg: Full configuration dictionary
    """
    log_cfg = cfg.get('logging', {}) or {}
    level_name = str(log_cfg.get('level', 'WARNING')).upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        raise ConfigError(f"Unknown logging level: {level_name}")

    handlers = [logging.StreamHandler()]
    log_file = log_cfg.get('file')
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=level,
        format=log_cfg.get('format', '%(asctime)s - %(name)s - %(levelname)s - %(message)s'),
        handlers=handlers,
        force=True,
    )
