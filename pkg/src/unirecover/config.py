from functools import lru_cache
from typing import List, Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Runtime knobs. Every field can be set as UNIRECOVER_<FIELD> or in .env"""

    cardinality_cap: int = 10_000_000
    lattice_cap: int = 10_000_000
    net_resolution_cap: int = 24
    grid_oversampling: int = 8
    near_singularity: float = 1e-6
    minimax_tolerance: float = 1e-9
    exact_mode_max_dim: int = 64
    probes: int = 200
    bernoulli_truncation: int = 4096
    tail_fraction: float = 0.01
    seed: int = 0
    threads: Optional[int] = None
    archive_url: str = "sqlite:///unirecover_runs.db"
    cors_origins: List[str] = ["http://localhost:3000"]

    class Config:
        env_prefix = "UNIRECOVER_"
        env_file = ".env"
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    return Settings()
