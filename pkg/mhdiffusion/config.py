"""Diffusion workbench configuration"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Logging (from environment variables)
LOG_LEVEL = os.getenv("MHD_LOG_LEVEL", "INFO")
LOG_DIR = os.getenv("MHD_LOG_DIR", "logs")

# Adaptation defaults
DIFFUSION_CONFIG = {
    "mu": 0.08,                  # Step size of every node
    "nu": 0.05,                  # Discount of the moving-average variance estimates
    "alpha_hat": 0.95            # Balancing coefficient when no LMI solve is available
}


# Monte Carlo simulation
SIMULATION_CONFIG = {
    "runs": 1000,                # Independent runs averaged per trace
    "iterations": 1000,          # Iterations per run
    "chunk_size": 100,           # Runs per RNG stream / worker task
    "steady_tail_fraction": 0.2, # Tail share used for steady-state estimates
    "divergence_limit": 1e12,    # MSD above this aborts the run
    "convergence_fraction": 0.9, # Share of the total decrease defining convergence time
    "seed": int(os.getenv("MHD_SEED", "0")),
    "n_jobs": int(os.getenv("MHD_N_JOBS", "1"))
}


# Solvers
SOLVER_CONFIG = {
    "beta_tolerance": 1e-9,      # Absolute bisection tolerance on beta
    "beta_max": 1e6,             # Upper bisection bracket
    "psd_rel_tol": 1e-9,         # min eigenvalue >= -tol * spectral norm
    "lyapunov_tol": 1e-10,
    "lyapunov_max_iter": 100000,
    "lp_tol": 1e-9,
    "lp_feasibility_tol": 1e-7,  # Phase-1 objective above this means infeasible
    "lp_max_iter": 50000,
    "degenerate_switch": 50,     # Degenerate pivots before switching to Bland's rule
    "integrality_tol": 1e-6,
    "max_bnb_nodes": 200000
}


# Synthetic scenarios
SYNTH_CONFIG = {
    "tree": {
        "nodes": 8,
        "M": 3,
        "sigma_v2_range": (0.05, 0.2)
    },
    "random": {
        "nodes": 20,
        "M": 2,
        "side": 10.0,            # Square deployment area side length
        "radius": 3.0,           # Initial communication radius, grown until connected
        "sigma_v2_range": (0.05, 0.2)
    },
    "signal_power": 100.0        # Tr(R_u) = signal_power * sigma_v2
}
