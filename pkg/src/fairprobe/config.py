"""Run configuration: defaults, config file, environment, CLI flags.

Precedence, lowest to highest: built-in defaults, config file, environment
variables prefixed FAIRPROBE_, command-line flags. The file may be simple
``key=value`` lines or a JSON object carrying the same keys.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

logger = logging.getLogger(__name__)

ENV_PREFIX = "FAIRPROBE_"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    registry_url: str | None = None
    seed_file: str | None = None
    out: str = "runs"
    run_id: str | None = None  # unset means a fresh run
    workers_harvest: int = 4
    workers_select: int = 12
    workers_probe: int = 34
    timeout: float = 20.0
    retries: int = 1
    max_pages: int | None = None
    doi_resolver: str = "https://doi.org/"
    geo_require_coordinates: bool = False
    allow_seed_fallback: bool = False
    # partial predecessors block a step only when this is switched off
    allow_partial: bool = True
    politeness_delay: float = 1000.0  # ms between requests to one endpoint
    per_host_delay: float = 1000.0  # ms between probe requests to one host
    max_redirects: int = 10
    max_body_bytes: int = 0
    detail_workers: int = 4

    def snapshot(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}

_INT_FIELDS = {
    "workers_harvest",
    "workers_select",
    "workers_probe",
    "retries",
    "max_redirects",
    "max_body_bytes",
    "detail_workers",
}
_OPTIONAL_INT_FIELDS = {"max_pages"}
_FLOAT_FIELDS = {"timeout", "politeness_delay", "per_host_delay"}
_BOOL_FIELDS = {"geo_require_coordinates", "allow_seed_fallback", "allow_partial"}
_OPTIONAL_STR_FIELDS = {"registry_url", "seed_file", "run_id"}

_ALL_FIELDS = {f.name for f in fields(RunConfig)}


def _convert(key: str, value: Any) -> Any:
    if isinstance(value, str):
        value = value.strip()
    if key in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        lowered = str(value).lower()
        if lowered in _BOOL_TRUE:
            return True
        if lowered in _BOOL_FALSE:
            return False
        raise ConfigError(f"{key}: {value!r} is not a boolean")
    if key in _OPTIONAL_INT_FIELDS:
        if value in (None, "", "none"):
            return None
        return int(value)
    if key in _INT_FIELDS:
        return int(value)
    if key in _FLOAT_FIELDS:
        return float(value)
    if key in _OPTIONAL_STR_FIELDS:
        return None if value in (None, "") else str(value)
    return str(value)


def apply_settings(config: RunConfig, settings: Mapping[str, Any]) -> RunConfig:
    for key, value in settings.items():
        if key not in _ALL_FIELDS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            setattr(config, key, _convert(key, value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    return config


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Settings from a JSON object or ``key=value`` lines."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read configuration file {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            data = json.loads(text)
        except ValueError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return data
    settings: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        settings[key.strip()] = value.strip()
    return settings


def env_settings(environ: Mapping[str, str] | None = None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out: dict[str, str] = {}
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        if name in _ALL_FIELDS:
            out[name] = value
        else:
            logger.warning("ignoring unknown environment override %s", key)
    return out


def build_config(
    config_file: str | Path | None = None,
    cli_settings: Mapping[str, Any] | None = None,
    environ: Mapping[str, str] | None = None,
) -> RunConfig:
    config = RunConfig()
    if config_file:
        apply_settings(config, load_config_file(config_file))
    apply_settings(config, env_settings(environ))
    if cli_settings:
        apply_settings(config, cli_settings)
    return config
