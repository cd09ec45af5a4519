"""Configuration management utilities"""

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from ..kernels.density import SkewParams, TruncationPolicy
from ..oracles.quadrature import QuadratureSpec
from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class SamplerSettings:
    """Stream and sample-size settings of the sampler commands."""

    seed: int = 20240501
    stream: int = 0
    n: int = 50000
    shards: int = 1


def load_config(config_path: str = "config.yaml") -> Dict[str, Any]:
    """Load configuration from YAML file.

    Values from the file override the defaults section by section, so a file
    may set only what it changes.

    Args:
        config_path: Path to config file (default: config.yaml in current dir)

    Returns:
        Configuration dictionary
    """
    # Try to find config in multiple locations
    search_paths = [
        Path(config_path),  # As given
        Path.cwd() / config_path,  # Explicit current directory
        Path(__file__).parent.parent.parent / config_path,  # Package root
    ]

    for path in search_paths:
        if path.exists():
            try:
                with open(path, 'r', encoding='utf-8') as f:
                    loaded = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigurationError(f"Cannot parse {path}: {e}") from e
            if not isinstance(loaded, dict):
                raise ConfigurationError(f"{path} must contain a mapping at the top level")
            return merge_config(get_default_config(), loaded)

    # Return default config if not found
    return get_default_config()


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively overlay override onto a copy of base."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


def get_default_config() -> Dict[str, Any]:
    """Get default configuration.

    Returns:
        Default configuration dictionary
    """
    return {
        'model': {
            'z1': 0.0,
            'z2': 1.0,
            'beta1': 0.5,
            'beta2': -0.5,
            'mu': 0.0,
            't': 1.0,
            'x': 0.5
        },
        'truncation': {
            'n_max': 10,
            'tol': 1.0e-10,
            'merge_gap': 0.05
        },
        'quadrature': {
            'w_cutoff': None,
            'nodes': 32,
            'tolerance': 1.0e-11,
            'max_doublings': 8
        },
        'sampler': {
            'seed': 20240501,
            'stream': 0,
            'n': 50000,
            'shards': 1
        },
        'walk': {
            'walkers': 100000,
            'dx': 0.01
        },
        'output': {
            'format': 'csv',
            'ysteps': 401,
            'barrier_eps': 1.0e-9
        },
        'logging': {
            'level': 'WARNING'
        }
    }


def _section(config: Optional[Dict[str, Any]], name: str) -> Dict[str, Any]:
    config = config if config is not None else load_config()
    section = config.get(name, {}) or {}
    if not isinstance(section, dict):
        raise ConfigurationError(f"Config section '{name}' must be a mapping")
    return section


def _build(factory, section: Dict[str, Any], keys, name: str):
    """Construct factory from a section; out-of-range values keep their DomainError."""
    try:
        return factory(**{k: section[k] for k in keys if k in section})
    except DomainError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid '{name}' section: {e}") from e


def get_default_params(config: Optional[Dict[str, Any]] = None) -> SkewParams:
    """Model parameters from the 'model' section."""
    return _build(SkewParams, _section(config, 'model'),
                  ('z1', 'z2', 'beta1', 'beta2', 'mu'), 'model')


def get_truncation_policy(config: Optional[Dict[str, Any]] = None) -> TruncationPolicy:
    """Truncation policy from the 'truncation' section."""
    return _build(TruncationPolicy, _section(config, 'truncation'),
                  ('n_max', 'tol', 'merge_gap'), 'truncation')


def get_quadrature_spec(config: Optional[Dict[str, Any]] = None) -> QuadratureSpec:
    """Quadrature settings from the 'quadrature' section."""
    return _build(QuadratureSpec, _section(config, 'quadrature'),
                  ('w_cutoff', 'nodes', 'tolerance', 'max_doublings'), 'quadrature')


def get_sampler_settings(config: Optional[Dict[str, Any]] = None) -> SamplerSettings:
    """Seed, stream, sample size and shard count from the 'sampler' section."""
    return _build(SamplerSettings, _section(config, 'sampler'),
                  ('seed', 'stream', 'n', 'shards'), 'sampler')


def get_log_level(config: Optional[Dict[str, Any]] = None) -> str:
    """Get the log level from config.

    Returns:
        Logging level name
    """
    return str(_section(config, 'logging').get('level', 'WARNING')).upper()
