"""Application configuration using pydantic-settings."""

from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-level settings; scenario parameters live in SimConfig."""

    model_config = SettingsConfigDict(
        env_prefix="QRASIM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Application
    app_name: str = Field(default="qrasim", description="Application name")
    log_level: str = Field(default="INFO", description="Logging level")
    log_dir: Path | None = Field(
        default=None, description="Directory for rotating log files (optional)"
    )

    # Monte Carlo
    workers: int = Field(default=1, ge=1, description="Worker processes per sweep")
    default_reps: int = Field(
        default=200, ge=1, description="Episodes per grid point"
    )
    default_max_frames: int = Field(
        default=1_000_000, ge=1, description="Frame cap per episode"
    )

    # Output
    output_dir: Path = Field(
        default=Path("."), description="Directory for bare CSV file names"
    )

    @field_validator("output_dir", mode="before")
    @classmethod
    def ensure_path(cls, v: str | Path) -> Path:
        """Ensure output directory is a Path."""
        return Path(v) if isinstance(v, str) else v

    @field_validator("log_level")
    @classmethod
    def normalize_level(cls, v: str) -> str:
        """Upper-case the log level name."""
        return v.upper()


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
