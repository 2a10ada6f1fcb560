# app/core/config.py
from functools import lru_cache
from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Reproducibility
    DEFAULT_SEED: int = 42

    # Partitioning
    R_MIN: int = 2
    R_MAX: int = 10
    MAX_EMBEDDING_MODES: int = 12
    ROW_NORMALIZE_EMBEDDING: bool = False

    # k-means
    KMEANS_MAX_ITER: int = 300
    KMEANS_TOL: float = 1e-8
    KMEANS_N_INIT: int = 50

    # Numerical tolerances
    STOCHASTIC_TOL: float = 1e-9
    PATH_AGREEMENT_TOL: float = 1e-10
    QEP_RESIDUAL_TOL: float = 1e-8
    ZERO_EIG_TOL: float = 1e-9
    SYMMETRY_TOL: float = 1e-9

    # Swing-equation simulation
    SIM_DT: float = 1e-3
    SIM_HORIZON: float = 10.0
    SIM_MAX_HORIZON: float = 30.0
    SIM_BLOWUP_THRESHOLD: float = 1e3

    # Sweeps run in a thread pool
    MAX_WORKERS: int = 4

    LOG_LEVEL: str = "INFO"
    OUTPUT_FORMAT: Literal["csv", "json"] = "csv"

    model_config = SettingsConfigDict(
        env_prefix="INERTIA_",
        env_file=".env",
        extra="ignore",
    )


# Create a global settings instance
settings = Settings()


@lru_cache()
def get_settings() -> Settings:
    return Settings()
