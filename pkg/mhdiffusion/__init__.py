"""
mhdiffusion - Energy-constrained multi-hop diffusion LMS

Analysis and planning library for diffusion adaptation over sensor networks
where nodes may consult estimates several hops away under energy budgets.
"""

__version__ = "1.0.0"
__author__ = "mhdiffusion Development Team"
__license__ = "MIT"

from mhdiffusion.config import (
    DIFFUSION_CONFIG,
    SIMULATION_CONFIG,
    SOLVER_CONFIG,
    SYNTH_CONFIG,
    LOG_LEVEL,
    LOG_DIR
)

__all__ = [
    "__version__",
    "DIFFUSION_CONFIG",
    "SIMULATION_CONFIG",
    "SOLVER_CONFIG",
    "SYNTH_CONFIG",
    "LOG_LEVEL",
    "LOG_DIR"
]
