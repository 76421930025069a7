from pathlib import Path
from typing import Annotated, Any

from dotenv import find_dotenv
from pydantic import BeforeValidator, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


def check_log_level(x: Any) -> str:
    level = str(x).strip().upper()
    if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
        raise ValueError(f"Unknown log level: {x}")
    return level


class Settings(BaseSettings):
    """Run-wide defaults; overridden by a KEY=value config file, the environment and CLI flags."""

    model_config = SettingsConfigDict(
        env_prefix="HAWKES_",
        env_file=find_dotenv(),
        env_file_encoding="utf-8",
        env_ignore_empty=True,
        extra="ignore",
        validate_default=False,
    )

    SEED: int = 0
    JOBS: int = Field(default=1, ge=1)
    LOG_LEVEL: Annotated[str, BeforeValidator(check_log_level)] = "INFO"

    # ingest
    MIN_EVENTS: int = Field(default=20, ge=1)
    MAX_EVENTS: int = Field(default=3000, ge=1)
    MIN_INTERACTIONS: int = Field(default=20, ge=1)
    MIN_CLASS_SIZE: int = Field(default=10, ge=0)

    # fitting
    N_STARTS: int = Field(default=10, ge=1)
    TOLERANCE: float = Field(default=1e-5, gt=0)
    MAX_ITERATIONS: int = Field(default=500, ge=1)

    # evaluation and learning
    SPLIT_FRACTION: float = Field(default=0.8, gt=0, lt=1)
    FOLDS: int = Field(default=5, ge=2)
    N_CANDIDATES: int = Field(default=50, ge=1)

    @model_validator(mode="after")
    def check_event_window(self) -> "Settings":
        if self.MAX_EVENTS < self.MIN_EVENTS:
            raise ValueError("MAX_EVENTS must be >= MIN_EVENTS")
        return self

    def merged(self, overrides: dict[str, Any]) -> "Settings":
        """Apply non-None flag values on top of these settings."""
        update = {k: v for k, v in overrides.items() if v is not None and k in type(self).model_fields}
        return type(self).model_validate({**self.model_dump(), **update})


def load_settings(config_file: str | Path | None = None) -> Settings:
    if config_file is None:
        return Settings()
    path = Path(config_file)
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    return Settings(_env_file=path)


settings = Settings()
