"""Runtime settings for ESAFL.

Cryptographic parameters are not settings: they travel in a profile file
(see :mod:`esafl.config.profile`) so every party loads identical values.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field


def get_default_data_dir() -> Path:
    """Get the default data directory (~/.esafl)."""
    return Path.home() / ".esafl"


class Settings(BaseModel):
    """Process-wide settings for clients, the aggregator and the CLI."""

    # Parameter profile (file path or built-in name)
    profile: str = Field(
        default="desk",
        description="Parameter profile: a key=value file or a built-in name (desk, full)",
    )

    # Network settings
    host: str = Field(
        default="127.0.0.1",
        description="Host the aggregator binds to / clients connect to",
    )
    port: int = Field(
        default=4650,
        description="Aggregator TCP port",
    )
    status_port: int | None = Field(
        default=None,
        description="Port of the read-only HTTP status surface (disabled if unset)",
    )

    # Protocol limits
    max_frame_bytes: int = Field(
        default=256 * 1024 * 1024,
        description="Largest accepted frame payload",
    )
    round_timeout: float = Field(
        default=60.0,
        description="Seconds the aggregator waits for all submissions of a round",
    )

    # Logging
    log_level: str = Field(
        default="INFO",
        description="Logging level",
    )

    # Output
    data_dir: Path = Field(
        default_factory=get_default_data_dir,
        description="Default directory for key files and traces",
    )

    model_config = {
        "validate_default": True,
        "extra": "forbid",
    }

    @classmethod
    def from_env(cls) -> Settings:
        """Load settings from environment variables."""
        env_mapping: dict[str, tuple[str, Any]] = {
            "ESAFL_PROFILE": ("profile", str),
            "ESAFL_HOST": ("host", str),
            "ESAFL_PORT": ("port", int),
            "ESAFL_STATUS_PORT": ("status_port", int),
            "ESAFL_MAX_FRAME_BYTES": ("max_frame_bytes", int),
            "ESAFL_ROUND_TIMEOUT": ("round_timeout", float),
            "ESAFL_LOG_LEVEL": ("log_level", str),
            "ESAFL_DATA_DIR": ("data_dir", Path),
        }

        kwargs: dict[str, Any] = {}
        for env_var, (field_name, type_func) in env_mapping.items():
            value = os.environ.get(env_var)
            if value is not None:
                kwargs[field_name] = type_func(value)

        return cls(**kwargs)


# Global settings instance
_settings: Settings | None = None


def get_settings() -> Settings:
    """Get the global settings instance."""
    global _settings
    if _settings is None:
        _settings = Settings.from_env()
    return _settings


def set_settings(settings: Settings) -> None:
    """Set the global settings instance."""
    global _settings
    _settings = settings
