"""Configuration settings for the likelihood embedding toolkit"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

from dotenv import load_dotenv

# Load .env file from project root
project_root = Path(__file__).parent.parent.parent
env_file = project_root / ".env"
if env_file.exists():
    load_dotenv(env_file)
else:
    # Try loading from current working directory
    load_dotenv()

OUTPUT_DIR_ENV = "LIKELIHOOD_EMBED_OUTPUT_DIR"


@dataclass
class Settings:
    """Toolkit-wide defaults"""

    # Output
    output_dir: str = "./results"
    log_level: str = "INFO"

    # Parallelism
    threads: int = 1

    # Parameter domains
    gaussian_mu_range: Tuple[float, float] = (-2.0, 2.0)
    gaussian_sigma_range: Tuple[float, float] = (0.6, 1.6)
    cauchy_theta_range: Tuple[float, float] = (-3.0, 3.0)
    gmm_mean_range: Tuple[float, float] = (-10.0, 10.0)
    gmm_weights: Tuple[float, ...] = field(default=(0.4, 0.35, 0.25))
    sigma_floor: float = 1e-6

    # Likelihood evaluation
    grid_chunk_size: int = 64

    # Tolerances
    bound_slack: float = 1e-9
    exact_tolerance: float = 1e-10

    def __post_init__(self):
        # The output directory is the only value taken from the environment
        self.output_dir = os.environ.get(OUTPUT_DIR_ENV, self.output_dir)

    def validate(self) -> bool:
        """Validate settings"""
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        for name in ("gaussian_mu_range", "gaussian_sigma_range", "cauchy_theta_range", "gmm_mean_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be an increasing pair, got {(lo, hi)}")
        if self.gaussian_sigma_range[0] < self.sigma_floor:
            raise ValueError("gaussian_sigma_range must lie above sigma_floor")
        if abs(sum(self.gmm_weights) - 1.0) > 1e-12:
            raise ValueError("gmm_weights must sum to 1")
        if self.bound_slack < 0 or self.exact_tolerance < 0:
            raise ValueError("bound_slack and exact_tolerance must be non-negative")
        return True


# Singleton instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get toolkit settings singleton"""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached singleton so the environment is re-read"""
    global _settings
    _settings = None
