"""
Configuration management for TallyFit.
Handles defaults, optional environment variables, key=value config files and
command-line overrides (flags > config file > environment > defaults).
"""

import logging
import os
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv

from core.errors import ConfigError


def _parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_int_tuple(value: Any) -> Tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    parts = [part.strip() for part in str(value).split(",") if part.strip()]
    return tuple(int(part) for part in parts)


def _parse_optional_str(value: Any) -> Optional[str]:
    if value is None:
        return None
    text = str(value).strip()
    return text or None


# name -> (parser, default)
_FIELDS: Dict[str, Tuple[Any, Any]] = {
    # runtime
    "log_level": (str, "INFO"),
    "log_file": (_parse_optional_str, None),
    "threads": (int, 1),
    "seed": (int, 0),
    # data
    "standardize": (_parse_bool, True),
    "dev_precincts": (int, 40),
    # logit fitting
    "lr": (float, 2e-5),
    "iters_total": (int, 120),
    "iters_phase1": (int, 10),
    "iters_phase3": (int, 10),
    "bt_shrink": (float, 0.5),
    "bt_armijo": (float, 1e-4),
    "bt_max_halvings": (int, 30),
    "bt_init_scale": (float, 1.0),
    "bt_growth": (float, 2.0),
    "phi2_floor": (float, 1e-8),
    "agg_iters": (int, 1000),
    # neural fitting
    "nn_hidden": (int, 10),
    "nn_lr": (float, 2e-6),
    "nn_restarts": (int, 10),
    "nn_checkpoints": (_parse_int_tuple, (50, 100, 150, 200)),
    "nn_init_scale": (float, 0.1),
    # diagnostics
    "enumeration_cap": (int, 15),
    "separation_cap": (float, 1e6),
    "separation_random_directions": (int, 100),
}

_ENV_VARS = {
    "TALLYFIT_LOG_LEVEL": "log_level",
    "TALLYFIT_LOG_FILE": "log_file",
    "TALLYFIT_THREADS": "threads",
}


class Config:
    """Application configuration class."""

    def __init__(self, config_file: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                 use_env: bool = True):
        self.logger = logging.getLogger(__name__)

        for name, (_, default) in _FIELDS.items():
            setattr(self, name, default)

        if use_env:
            # Load .env if present; never required
            load_dotenv(override=False)
            env_values = {field: os.getenv(var) for var, field in _ENV_VARS.items()}
            self.apply({k: v for k, v in env_values.items() if v is not None}, source="environment")

        if config_file:
            self.load_file(config_file)

        if overrides:
            self.apply({k: v for k, v in overrides.items() if v is not None}, source="command line")

        self.validate()
        self.logger.debug("Configuration loaded successfully")

    @staticmethod
    def field_names() -> Iterable[str]:
        return _FIELDS.keys()

    def load_file(self, path: str) -> None:
        """Read key=value settings from a config file."""
        if not os.path.isfile(path):
            raise ConfigError("config file not found", source=path)
        values = dotenv_values(path)
        self.apply(values, source=path)
        self.logger.info(f"Loaded {len(values)} setting(s) from {path}")

    def apply(self, values: Mapping[str, Any], source: str = "overrides") -> None:
        for key, raw in values.items():
            name = key.strip().lower().replace("-", "_")
            if name not in _FIELDS:
                raise ConfigError(f"unknown configuration key '{key}'", source=source)
            if raw is None:
                continue
            parser, _ = _FIELDS[name]
            try:
                setattr(self, name, parser(raw))
            except (TypeError, ValueError) as e:
                raise ConfigError(f"invalid value for '{name}': {raw!r} ({e})", source=source) from e

    def validate(self) -> None:
        """Validate configuration settings."""
        problems = []
        if self.lr <= 0:
            problems.append("lr must be > 0")
        if self.nn_lr <= 0:
            problems.append("nn_lr must be > 0")
        if min(self.iters_total, self.iters_phase1, self.iters_phase3, self.agg_iters) < 0:
            problems.append("iteration counts must be >= 0")
        if self.iters_phase1 + self.iters_phase3 > self.iters_total:
            problems.append("iters_phase1 + iters_phase3 must not exceed iters_total")
        if not 0 < self.bt_shrink < 1:
            problems.append("bt_shrink must be in (0, 1)")
        if not 0 < self.bt_armijo < 1:
            problems.append("bt_armijo must be in (0, 1)")
        if self.bt_max_halvings < 0:
            problems.append("bt_max_halvings must be >= 0")
        if self.bt_init_scale <= 0 or self.bt_growth < 1:
            problems.append("bt_init_scale must be > 0 and bt_growth >= 1")
        if self.phi2_floor < 0:
            problems.append("phi2_floor must be >= 0")
        if self.nn_hidden < 1:
            problems.append("nn_hidden must be >= 1")
        if self.nn_restarts < 1:
            problems.append("nn_restarts must be >= 1")
        checkpoints = list(self.nn_checkpoints)
        if not checkpoints or checkpoints != sorted(set(checkpoints)) or checkpoints[0] < 0:
            problems.append("nn_checkpoints must be non-empty, non-negative and strictly ascending")
        if self.threads < 1:
            problems.append("threads must be >= 1")
        if self.dev_precincts < 0:
            problems.append("dev_precincts must be >= 0")
        if self.enumeration_cap < 1 or self.separation_cap < 1:
            problems.append("enumeration_cap and separation_cap must be >= 1")

        if problems:
            self.logger.error(f"Invalid configuration: {problems}")
            raise ConfigError("; ".join(problems))

    def as_dict(self) -> Dict[str, Any]:
        out = {}
        for name in _FIELDS:
            value = getattr(self, name)
            out[name] = list(value) if isinstance(value, tuple) else value
        return out
