"""Runtime settings read from the environment and ``.env``.

Scenario physics lives in scenario files (see ``irs_nlos.simkit.scenario``);
these settings only cover how the tool runs: default seed, output location,
sweep parallelism and tracing export.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from irs_nlos import __version__


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # =========================================================================
    # Runs
    # =========================================================================
    # Used when neither the CLI nor the scenario file names a seed
    default_seed: int | None = Field(default=None, alias="IRS_NLOS_SEED")
    output_dir: Path = Field(default=Path("out"), alias="IRS_NLOS_OUTPUT_DIR")
    sweep_workers: int = Field(default=1, alias="SWEEP_WORKERS")

    # =========================================================================
    # Observability - OpenTelemetry
    # =========================================================================
    enable_tracing: bool = Field(default=False, alias="ENABLE_TRACING")
    otlp_traces_endpoint: str = Field(
        default="http://localhost:4318/v1/traces",
        alias="OTEL_EXPORTER_OTLP_TRACES_ENDPOINT",
    )
    service_name: str = Field(default="irs-nlos", alias="OTEL_SERVICE_NAME")
    deployment_environment: str = Field(default="development", alias="DEPLOYMENT_ENVIRONMENT")

    @model_validator(mode="after")
    def validate_runtime_config(self) -> Settings:
        """Reject settings the runner cannot honour."""
        if self.sweep_workers < 1:
            raise ValueError(f"SWEEP_WORKERS must be at least 1, got {self.sweep_workers}")

        if self.enable_tracing and not self.otlp_traces_endpoint.strip():
            raise ValueError(
                "OTEL_EXPORTER_OTLP_TRACES_ENDPOINT must be set when ENABLE_TRACING is on."
            )

        return self

    @property
    def service_version(self) -> str:
        return __version__

    def resolve_seed(self, cli_seed: int | None, scenario_seed: int) -> int:
        """CLI flag first, then the environment, then the scenario file."""
        if cli_seed is not None:
            return cli_seed
        if self.default_seed is not None:
            return self.default_seed
        return scenario_seed

    def __str__(self) -> str:
        return (
            f"Settings(\n"
            f"  default_seed={self.default_seed},\n"
            f"  output_dir={self.output_dir},\n"
            f"  sweep_workers={self.sweep_workers},\n"
            f"  tracing_enabled={self.enable_tracing},\n"
            f"  otlp_endpoint={self.otlp_traces_endpoint},\n"
            f"  service={self.service_name} ({self.deployment_environment})\n"
            f")"
        )


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance.

    Returns:
        Settings: The application settings.

    Raises:
        ValueError: If the environment holds an invalid combination.
    """
    return Settings()
