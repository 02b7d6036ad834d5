"""Configuration settings for the offloading experiments."""

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix MEC_)."""

    model_config = SettingsConfigDict(
        env_prefix="MEC_", env_file=".env", case_sensitive=False, extra="ignore"
    )

    # Logging
    log_level: str = Field("INFO")

    # Output
    output_dir: str = Field("results")

    # Runs
    default_seed: int = Field(2019, ge=0)
    workers: int = Field(1, ge=1)
    max_sweeps: int = Field(10_000, ge=1)

    # Simulation
    sim_horizon_slots: int = Field(10_000_000, ge=1)
    sim_warmup_fraction: float = Field(0.1, ge=0, lt=1)
    validation_rel_tol: float = Field(0.05, gt=0)

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level '{v}'")
        return level


# Global settings instance
settings = Settings()
