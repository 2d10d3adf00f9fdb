import copy
import json
import os
from functools import lru_cache
from typing import Any, Optional

from dotenv import load_dotenv

from src.errors import ConfigError


# ----------------------------------------------------------
# Packaged defaults
# ----------------------------------------------------------
@lru_cache(maxsize=1)
def _packaged_defaults() -> dict[str, Any]:
    script_dir = os.path.dirname(os.path.abspath(__file__))
    config_path = os.path.join(script_dir, "config.json")
    with open(config_path, "r") as f:
        return json.load(f)


def load_config() -> dict[str, Any]:
    """Return a private copy of src/config.json."""
    return copy.deepcopy(_packaged_defaults())


def section(name: str) -> dict[str, Any]:
    return load_config().get(name, {})


def deep_merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


# ----------------------------------------------------------
# User config files
# ----------------------------------------------------------
def read_config_file(path: str) -> dict[str, Any]:
    """Read a JSON config file (backend, target, overrides, run)."""
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return data


def resolve_relative(path: Optional[str], relative_to: str) -> Optional[str]:
    """Resolve a path written inside a config file against that file's folder."""
    if not path or os.path.isabs(path):
        return path
    return os.path.join(os.path.dirname(os.path.abspath(relative_to)), path)


# ----------------------------------------------------------
# Environment
# ----------------------------------------------------------
def load_environment():
    """Load a .env file from the working directory when present. Real env vars win."""
    load_dotenv(override=False)
