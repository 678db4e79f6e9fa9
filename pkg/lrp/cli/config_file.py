from typing import Any, Dict, Optional

import os
import re

from dotenv import find_dotenv, load_dotenv
from pydantic import ValidationError

from ..errors import ConfigError
from ..experiments.config import ExperimentConfig

_LINE = re.compile(r"^(?P<key>[A-Za-z_][A-Za-z0-9_-]*)\s*=\s*(?P<value>.*?)\s*$")
_INT = re.compile(r"^[+-]?\d+$")

THREADS_ENV = "LRP_THREADS"


def parse_value(text: str) -> Any:
    """Scalar or bracketed list from the config syntax."""
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ValueError(f"unterminated list '{text}'")
        inner = text[1:-1].strip()
        return [parse_value(item) for item in inner.split(",")] if inner else []
    lowered = text.lower()
    if lowered == "none":
        return None
    if lowered in ("true", "false"):
        return lowered == "true"
    if _INT.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text.strip("\"'")


def read_config_file(path: str) -> Dict[str, Any]:
    """
    Read flat `key = value` lines; `#` starts a comment.

    Raises:
        ConfigError: For malformed lines, repeated keys or unknown keys.
    """
    values: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            match = _LINE.match(line)
            if match is None:
                raise ConfigError(f"line {number}", f"expected 'key = value', got '{line}'")
            key = match["key"].replace("-", "_")
            if key not in ExperimentConfig.model_fields:
                raise ConfigError(key, "unknown key")
            if key in values:
                raise ConfigError(key, f"repeated on line {number}")
            try:
                values[key] = parse_value(match["value"])
            except ValueError as e:
                raise ConfigError(key, str(e)) from e
    return values


def _environment_values() -> Dict[str, Any]:
    load_dotenv(find_dotenv(usecwd=True))
    threads = os.getenv(THREADS_ENV)
    if threads is None or threads == "":
        return {}
    if not _INT.match(threads.strip()):
        raise ConfigError("threads", f"{THREADS_ENV}={threads!r} is not an integer")
    return {"threads": int(threads)}


def parse_config(path: Optional[str] = None, flags: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Build the run configuration from flags, a config file, the environment and defaults.

    Args:
        path: Optional config file.
        flags: Values given on the command line; None entries are ignored.

    Returns:
        ExperimentConfig: The validated configuration.

    Raises:
        ConfigError: For unknown keys, type mismatches and violated preconditions, naming the key.
    """
    values: Dict[str, Any] = {}
    values.update(_environment_values())
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError("config", f"file '{path}' does not exist")
        values.update(read_config_file(path))
    for key, value in (flags or {}).items():
        if value is None:
            continue
        if key not in ExperimentConfig.model_fields:
            raise ConfigError(key, "unknown key")
        values[key] = value

    try:
        config = ExperimentConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        key = ".".join(str(part) for part in error["loc"]) or "config"
        raise ConfigError(key, error["msg"]) from e
    if config.theta_hat is not None:
        config.check_eps_grid(config.theta_hat, config.sizes[-1])
    return config
