from __future__ import annotations

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class SolverSettings(BaseSettings):
    """
    Process-wide defaults for solvers and the CLI.

    Values come from TSV_* environment variables or a local .env file.
    Problem files and command-line flags override them per run.
    """

    tol: float = Field(default=1e-10, gt=0)
    max_terms: int = Field(default=256, ge=1)
    max_iter: int = Field(default=256, ge=1)

    # Point membership snap: |t - p| <= snap_rel * max(1, |p|) for a member p.
    snap_rel: float = Field(default=1e-9, gt=0)
    compare_rel: float = Field(default=1e-12, gt=0)
    regressive_eps: float = Field(default=1e-14, ge=0)

    log_level: str = "WARNING"
    debug: bool = False
    selftest_seed: int = 20240601

    model_config = SettingsConfigDict(
        env_prefix="TSV_",
        env_file=".env",
        extra="ignore",
        populate_by_name=True,
    )


@lru_cache(maxsize=1)
def get_settings() -> SolverSettings:
    return SolverSettings()
