import os


class Settings:
    """Toolkit settings - all numeric defaults in one place."""

    # Threshold synthesis
    bisection_tol: float = float(os.getenv("RISTL_BISECTION_TOL", "1e-4"))
    chi_fraction: float = 0.05  # share of the Assumption-1 slack used as chi
    chi_max_halvings: int = 20
    boundary_points: int = 720  # norm-ball boundary discretization
    reference_tolerance: float = 0.05  # deviation from reference c that triggers a warning

    # Stochastic evaluation
    quadrature_nodes: int = 256
    mc_samples: int = int(os.getenv("RISTL_MC_SAMPLES", "200000"))
    mc_seed: int = int(os.getenv("RISTL_MC_SEED", "7"))

    # Barrier construction
    eta: float = 20.0
    activation_inflation: float = 1.1
    safety_chi: float = 0.05
    alpha_grid_points: int = 21
    containment_grid: int = 60

    # Controller
    zero_gradient: float = 1e-10
    gradient_perturbation: float = 1e-9

    # Integrator
    dt: float = 0.01
    divergence_factor: float = 1e3  # escape radius in box diagonals

    # Logging settings
    log_level: str = os.getenv("RISTL_LOG_LEVEL", "info")
    log_to_file: bool = os.getenv("RISTL_LOG_TO_FILE", "false").lower() == "true"
    log_file_path: str = os.getenv("RISTL_LOG_FILE", "./logs/ristl.log")
    log_file_rotation: str = "10 MB"
    log_file_retention: str = "7 days"
    log_file_compression: str = "gz"


# Global settings instance
settings = Settings()
