import json
import os
from pathlib import Path
from typing import Any, Literal, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.constants import (
    DEFAULT_BASE_URL,
    DEFAULT_CONFIG_PATH,
    DEFAULT_MODEL_NAME,
    DEFAULT_TOKEN_BUDGET,
    ENV_API_URL,
)
from app.core.exceptions import ConfigError


class OracleConfig(BaseModel):
    """
    Thresholds used by the geometric predicates. Lengths are in meters.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    near_threshold: float = Field(default=1.0, gt=0)
    vertical_gap_tolerance: float = Field(default=0.15, gt=0)
    similar_volume_ratio: float = Field(default=1.1, ge=1)

    def scaled(self, factor: float) -> "OracleConfig":
        return OracleConfig(
            near_threshold=self.near_threshold * factor,
            vertical_gap_tolerance=self.vertical_gap_tolerance * factor,
            similar_volume_ratio=self.similar_volume_ratio,
        )


class LlmConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    base_url: str = DEFAULT_BASE_URL
    model_name: str = DEFAULT_MODEL_NAME
    temperature: float = Field(default=0.0, ge=0)
    max_output_tokens: int = Field(default=1024, gt=0)
    timeout: float = Field(default=60.0, gt=0)
    max_retries: int = Field(default=2, ge=0)
    backoff_seconds: float = Field(default=1.0, ge=0)
    concurrency: int = Field(default=4, ge=1)


class AppConfig(BaseModel):
    """
    Merged view of defaults, config file, environment and command-line flags.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    oracle: OracleConfig = OracleConfig()
    llm: LlmConfig = LlmConfig()
    token_budget: int = Field(default=DEFAULT_TOKEN_BUDGET, gt=0)
    strict_parse: bool = False
    output_format: Literal["text", "json"] = "text"
    precision: int | None = Field(default=1, ge=0)
    template_path: Path | None = None
    examples_path: Path | None = None
    lexicon_path: Path | None = None

    @model_validator(mode="after")
    def _check_paths(self):
        for name in ("template_path", "examples_path", "lexicon_path"):
            path = getattr(self, name)
            if path is not None and not path.exists():
                raise ValueError(f"{name} does not exist: {path}")
        return self


def _deep_merge(base: dict, override: Mapping[str, Any]) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            current = merged.get(key)
            merged[key] = _deep_merge(current if isinstance(current, dict) else {}, value)
        else:
            merged[key] = value
    return merged


def _read_config_file(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    if "api_key" in data or "api_key" in data.get("llm", {}):
        raise ConfigError(
            "API keys are read from the environment only; remove 'api_key' from the config file"
        )
    return data


def load_config(
    path: Path | str | None = None,
    environ: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> AppConfig:
    """
    Precedence: flag > env > file > default.

    An explicitly given config file must exist; the default location is optional.
    """
    environ = os.environ if environ is None else environ
    merged: dict = {}

    if path is not None:
        path = Path(path).expanduser()
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        merged = _deep_merge(merged, _read_config_file(path))
    elif DEFAULT_CONFIG_PATH.exists():
        merged = _deep_merge(merged, _read_config_file(DEFAULT_CONFIG_PATH))

    env_url = environ.get(ENV_API_URL, "").strip()
    if env_url:
        merged = _deep_merge(merged, {"llm": {"base_url": env_url}})

    if overrides:
        merged = _deep_merge(merged, overrides)

    try:
        return AppConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e
