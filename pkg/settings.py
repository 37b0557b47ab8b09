"""
RVNS settings
Loads defaults from the environment (and a local .env file).
"""

import logging
import os

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict

# Load environment variables
load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_level: str = "INFO"

    # Reconstruction defaults
    lambda1: float = 1e-3
    lambda2: float = 1e-3
    kl_floor: float = 1e-12
    max_iterations: int = 500
    constraint_tolerance: float = 1e-8
    objective_tolerance: float = 1e-12
    optimality_tolerance: float = 1e-12

    # Attack default
    grid_resolution: int = 1000

    # Survey served by the collector
    a: float = 0.0
    b: float = 10.0
    d: float = 2.0
    k: int = 5
    m: int = 100


def _env(name: str, default):
    value = os.getenv(name)
    if value is None or value.strip() == "":
        return default
    return value


def load_settings() -> Settings:
    """Read RVNS_* variables, falling back to the model defaults."""
    defaults = Settings()
    return Settings(
        log_level=_env("RVNS_LOG_LEVEL", defaults.log_level),
        lambda1=_env("RVNS_LAMBDA1", defaults.lambda1),
        lambda2=_env("RVNS_LAMBDA2", defaults.lambda2),
        kl_floor=_env("RVNS_KL_FLOOR", defaults.kl_floor),
        max_iterations=_env("RVNS_MAX_ITERATIONS", defaults.max_iterations),
        constraint_tolerance=_env("RVNS_CONSTRAINT_TOLERANCE", defaults.constraint_tolerance),
        objective_tolerance=_env("RVNS_OBJECTIVE_TOLERANCE", defaults.objective_tolerance),
        optimality_tolerance=_env("RVNS_OPTIMALITY_TOLERANCE", defaults.optimality_tolerance),
        grid_resolution=_env("RVNS_GRID_RESOLUTION", defaults.grid_resolution),
        a=_env("RVNS_A", defaults.a),
        b=_env("RVNS_B", defaults.b),
        d=_env("RVNS_D", defaults.d),
        k=_env("RVNS_K", defaults.k),
        m=_env("RVNS_M", defaults.m),
    )


def configure_logging(level: str = "INFO") -> None:
    """Install a single stream handler on the root logger."""
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, force=True)
