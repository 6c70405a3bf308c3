from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="CARNOT_KIT_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Algebra validation
    validation_tolerance: float = 1e-10
    rank_tolerance: float = 1e-10
    bch_max_order: int = 6

    # Randomness and parallelism
    seed: int = 0
    threads: int = 1

    # Group operations
    chart_radius: float = 0.5
    newton_max_iterations: int = 50
    cc_starts: int = 8
    cc_segments: int = 4
    cc_endpoint_tolerance: float = 1e-6
    cc_max_iterations: int = 500
    packing_samples_per_ball: int = 8
    packing_core_radius: float = 0.6
    packing_max_samples: int = 200_000

    # Pansu calculus
    eps_ladder: List[float] = [0.2, 0.1, 0.05, 0.025, 0.0125]
    probe_count: int = 32
    linear_tolerance: float = 1e-6

    # Heisenberg group
    loop_tolerance: float = 1e-6
    support_tolerance: float = 1e-12
    loop_size: float = 0.5
    path_nodes: int = 64
    flow_steps: int = 200
    hofer_grid: int = 101
    hofer_times: int = 21
    ball_ratio_samples: int = 200_000
    fiber_resolution: int = 400
    invariant_samples: int = 4000

    # Metric lab
    lipschitz_exponent_threshold: float = -0.2
    dilatation_stability: float = 0.01

    # Logging
    log_level: str = "INFO"


settings = Settings()
